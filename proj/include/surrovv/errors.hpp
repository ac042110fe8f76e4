#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace surrovv {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration or parameters. The CLI maps this to exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition of an operation.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class DivergedTrajectory : public Error {
 public:
  DivergedTrajectory(std::size_t step, const std::string& what)
      : Error(what), step_(step) {}
  /// Index of the first grid row that came out non-finite.
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class SingularNetwork : public Error {
 public:
  using Error::Error;
};

class InfeasibleDispatch : public Error {
 public:
  using Error::Error;
};

class CalibrationFailure : public Error {
 public:
  CalibrationFailure(const std::string& what,
                     std::vector<std::pair<double, double>> sweep)
      : Error(what), sweep_(std::move(sweep)) {}
  /// (amplitude, max e_z) pairs probed while diagnosing the failure.
  const std::vector<std::pair<double, double>>& sweep() const noexcept {
    return sweep_;
  }

 private:
  std::vector<std::pair<double, double>> sweep_;
};

class DegenerateCoupling : public Error {
 public:
  using Error::Error;
};

class EstimationFailure : public Error {
 public:
  using Error::Error;
};

class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

class ScaleError : public Error {
 public:
  using Error::Error;
};

class NoCertificate : public Error {
 public:
  using Error::Error;
};

class InfeasibleSplit : public Error {
 public:
  using Error::Error;
};

}  // namespace surrovv

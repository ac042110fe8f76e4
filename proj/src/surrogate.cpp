#include "surrovv/surrogate.hpp"

#include "surrovv/errors.hpp"
#include "surrovv/io.hpp"
#include "surrovv/optim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace surrovv {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Normalization

InputNormalization InputNormalization::fit(const OperatingBox& box) {
  box.validate();
  InputNormalization n;
  n.offset = box.center();
  n.scale = 0.5 * box.width();
  for (Eigen::Index i = 0; i < n.scale.size(); ++i) {
    if (!(n.scale[i] > 0.0)) n.scale[i] = 1.0;
  }
  return n;
}

InputNormalization InputNormalization::identity(int dim) {
  InputNormalization n;
  n.offset = Vector::Zero(dim);
  n.scale = Vector::Ones(dim);
  return n;
}

void InputNormalization::validate() const {
  if (offset.size() != scale.size()) {
    throw DimensionError("normalization offset/scale sizes differ");
  }
  for (Eigen::Index i = 0; i < scale.size(); ++i) {
    if (!std::isfinite(offset[i]) || !std::isfinite(scale[i]) ||
        !(scale[i] > 0.0)) {
      throw ContractViolation("normalization must be finite with scale > 0");
    }
  }
}

// ---------------------------------------------------------------------------
// Network container

MlpSurrogate::MlpSurrogate(int n_state, int n_u, std::vector<int> hidden)
    : n_state_(n_state), n_u_(n_u) {
  if (n_state < 1 || n_u < 0) throw DimensionError("bad surrogate dimensions");
  layer_sizes_.push_back(n_in());
  for (int h : hidden) {
    if (h < 1) throw DimensionError("hidden layer width must be >= 1");
    layer_sizes_.push_back(h);
  }
  layer_sizes_.push_back(n_state);
  for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
    weights_.push_back(Matrix::Zero(layer_sizes_[l + 1], layer_sizes_[l]));
    biases_.push_back(Vector::Zero(layer_sizes_[l + 1]));
  }
  norm_ = InputNormalization::identity(n_in());
}

void MlpSurrogate::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unit = [&rng] {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix& W = weights_[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(W.rows() + W.cols()));
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) {
        W(i, j) = limit * (2.0 * unit() - 1.0);
      }
    }
    biases_[l].setZero();
  }
}

int MlpSurrogate::parameter_count() const {
  int n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<int>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

// Flat layout: per layer, W row-major followed by b.
Vector MlpSurrogate::flat_parameters() const {
  Vector theta(parameter_count());
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const Matrix& W = weights_[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) theta[k++] = W(i, j);
    }
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) theta[k++] = biases_[l][i];
  }
  return theta;
}

void MlpSurrogate::set_flat_parameters(const Vector& theta) {
  if (theta.size() != parameter_count()) {
    throw DimensionError("parameter vector has " + std::to_string(theta.size()) +
                         " entries, expected " +
                         std::to_string(parameter_count()));
  }
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix& W = weights_[l];
    for (Eigen::Index i = 0; i < W.rows(); ++i) {
      for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = theta[k++];
    }
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l][i] = theta[k++];
  }
}

Vector MlpSurrogate::input(const Vector& x0, const Vector& u, double tau) const {
  if (x0.size() != n_state_ || u.size() != n_u_) {
    throw DimensionError("surrogate expects x0 of size " +
                         std::to_string(n_state_) + " and u of size " +
                         std::to_string(n_u_));
  }
  Vector in(n_in());
  in << x0, u, tau;
  return in;
}

void MlpSurrogate::validate() const {
  if (layer_sizes_.size() < 2) throw ContractViolation("network has no layers");
  if (layer_sizes_.front() != n_in() || layer_sizes_.back() != n_state_) {
    throw DimensionError("layer sizes do not match input/output dimensions");
  }
  if (weights_.size() + 1 != layer_sizes_.size() ||
      biases_.size() != weights_.size()) {
    throw DimensionError("layer count mismatch");
  }
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l].rows() != layer_sizes_[l + 1] ||
        weights_[l].cols() != layer_sizes_[l] ||
        biases_[l].size() != layer_sizes_[l + 1]) {
      throw DimensionError("layer " + std::to_string(l) +
                           " does not chain with its neighbours");
    }
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) {
      throw ContractViolation("non-finite network parameter");
    }
  }
  norm_.validate();
  if (norm_.offset.size() != n_in()) {
    throw DimensionError("normalization size does not match input size");
  }
  if (!std::isfinite(t_max_) || t_max_ < 0.0) {
    throw ContractViolation("t_max must be finite and >= 0");
  }
}

json MlpSurrogate::to_json() const {
  json j;
  j["layer_sizes"] = layer_sizes_;
  json ws = json::array();
  json bs = json::array();
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i) {
      std::vector<double> row(weights_[l].cols());
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) row[c] = weights_[l](i, c);
      rows.push_back(row);
    }
    ws.push_back(rows);
    bs.push_back(std::vector<double>(biases_[l].data(),
                                     biases_[l].data() + biases_[l].size()));
  }
  j["weights"] = ws;
  j["biases"] = bs;
  j["normalization"] = {
      {"offset", std::vector<double>(norm_.offset.data(),
                                     norm_.offset.data() + norm_.offset.size())},
      {"scale", std::vector<double>(norm_.scale.data(),
                                    norm_.scale.data() + norm_.scale.size())}};
  j["activation"] = "tanh";
  j["t_max"] = t_max_;
  return j;
}

namespace {

Vector to_vector(const json& j, const char* what) {
  if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(std::string(what) + " must hold numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace

MlpSurrogate MlpSurrogate::from_json(const json& j) {
  try {
    if (j.value("activation", std::string("tanh")) != "tanh") {
      throw ConfigError("only tanh activation is supported");
    }
    const auto sizes = j.at("layer_sizes").get<std::vector<int>>();
    if (sizes.size() < 2) throw ConfigError("layer_sizes needs at least two entries");
    MlpSurrogate net;
    net.layer_sizes_ = sizes;
    net.n_state_ = sizes.back();
    net.n_u_ = sizes.front() - net.n_state_ - 1;
    if (net.n_u_ < 0) throw DimensionError("input layer too small for state size");
    const json& ws = j.at("weights");
    const json& bs = j.at("biases");
    if (ws.size() + 1 != sizes.size() || bs.size() + 1 != sizes.size()) {
      throw DimensionError("weights/biases count does not match layer_sizes");
    }
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const json& rows = ws[l];
      Matrix W(sizes[l + 1], sizes[l]);
      if (static_cast<int>(rows.size()) != sizes[l + 1]) {
        throw DimensionError("weight matrix " + std::to_string(l) + " has wrong row count");
      }
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Vector r = to_vector(rows[i], "weight row");
        if (r.size() != sizes[l]) {
          throw DimensionError("weight matrix " + std::to_string(l) + " has wrong column count");
        }
        W.row(static_cast<Eigen::Index>(i)) = r.transpose();
      }
      net.weights_.push_back(W);
      net.biases_.push_back(to_vector(bs[l], "bias"));
    }
    net.norm_.offset = to_vector(j.at("normalization").at("offset"), "offset");
    net.norm_.scale = to_vector(j.at("normalization").at("scale"), "scale");
    net.t_max_ = j.value("t_max", 0.0);
    net.validate();
    return net;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed weight file: ") + e.what());
  }
}

void MlpSurrogate::save(const std::filesystem::path& path) const {
  io::write_text(path, to_json().dump(1) + "\n");
}

MlpSurrogate MlpSurrogate::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open weight file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse weight file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Batched passes

namespace {

// Column-batched forward pass with the tau-tangent carried alongside.
struct Cache {
  std::vector<Matrix> h;   // h[0] normalized input, h[i] hidden layer i
  std::vector<Matrix> hd;  // d h / d tau (raw tau)
  std::vector<Matrix> ad;  // d a / d tau, a = pre-activation; ad[0] unused
  Matrix y;
  Matrix yd;
};

int tau_index(const MlpSurrogate& net) { return net.n_in() - 1; }

Cache run(const MlpSurrogate& net, const Matrix& X, bool tangent) {
  if (X.rows() != net.n_in()) {
    throw DimensionError("input batch has " + std::to_string(X.rows()) +
                         " rows, expected " + std::to_string(net.n_in()));
  }
  const auto& norm = net.normalization();
  const Eigen::Index N = X.cols();
  const int L = net.n_layers();
  Cache c;
  c.h.resize(L);
  c.ad.resize(L);
  c.h[0] = (X.colwise() - norm.offset).array().colwise() / norm.scale.array();
  if (tangent) {
    c.hd.resize(L);
    c.hd[0] = Matrix::Zero(net.n_in(), N);
    c.hd[0].row(tau_index(net)).setConstant(1.0 / norm.scale[tau_index(net)]);
  }
  for (int l = 0; l + 1 < L; ++l) {
    const Matrix& W = net.weights()[l];
    Matrix a = W * c.h[l];
    a.colwise() += net.biases()[l];
    c.h[l + 1] = a.array().tanh().matrix();
    if (tangent) {
      c.ad[l + 1] = W * c.hd[l];
      c.hd[l + 1] =
          ((1.0 - c.h[l + 1].array().square()) * c.ad[l + 1].array()).matrix();
    }
  }
  c.y = net.weights()[L - 1] * c.h[L - 1];
  c.y.colwise() += net.biases()[L - 1];
  if (tangent) c.yd = net.weights()[L - 1] * c.hd[L - 1];
  return c;
}

std::vector<Eigen::Index> layer_offsets(const MlpSurrogate& net) {
  std::vector<Eigen::Index> off;
  Eigen::Index k = 0;
  for (int l = 0; l < net.n_layers(); ++l) {
    off.push_back(k);
    k += net.weights()[l].size() + net.biases()[l].size();
  }
  return off;
}

void add_layer_gradient(Vector& grad, Eigen::Index offset, const Matrix& dW,
                        const Vector& db) {
  Eigen::Index k = offset;
  for (Eigen::Index i = 0; i < dW.rows(); ++i) {
    for (Eigen::Index j = 0; j < dW.cols(); ++j) grad[k++] += dW(i, j);
  }
  for (Eigen::Index i = 0; i < db.size(); ++i) grad[k++] += db[i];
}

// Reverse sweep given output adjoints gy (and gyd for the tangent output,
// empty when the batch carried no tangent).
void backward(const MlpSurrogate& net, const Cache& c, const Matrix& gy,
              const Matrix& gyd, Vector& grad) {
  const int L = net.n_layers();
  const bool tangent = gyd.size() > 0;
  const auto off = layer_offsets(net);
  {
    Matrix dW = gy * c.h[L - 1].transpose();
    if (tangent) dW.noalias() += gyd * c.hd[L - 1].transpose();
    add_layer_gradient(grad, off[L - 1], dW, gy.rowwise().sum());
  }
  if (L == 1) return;
  Matrix gh = net.weights()[L - 1].transpose() * gy;
  Matrix ghd;
  if (tangent) ghd = net.weights()[L - 1].transpose() * gyd;
  for (int l = L - 2; l >= 0; --l) {
    const auto H = c.h[l + 1].array();
    const Eigen::ArrayXXd s = 1.0 - H.square();
    Matrix ga;
    Matrix gad;
    if (tangent) {
      gad = (s * ghd.array()).matrix();
      ga = (s * (gh.array() - 2.0 * H * c.ad[l + 1].array() * ghd.array())).matrix();
    } else {
      ga = (s * gh.array()).matrix();
    }
    Matrix dW = ga * c.h[l].transpose();
    if (tangent) dW.noalias() += gad * c.hd[l].transpose();
    add_layer_gradient(grad, off[l], dW, ga.rowwise().sum());
    if (l > 0) {
      gh = net.weights()[l].transpose() * ga;
      if (tangent) ghd = net.weights()[l].transpose() * gad;
    }
  }
}

void check_field(const MlpSurrogate& net, const VectorField& field) {
  if (field.n_state != net.n_state() || field.n_param != net.n_u()) {
    throw DimensionError("vector field dimensions (" +
                         std::to_string(field.n_state) + " states, " +
                         std::to_string(field.n_param) +
                         " params) do not match the surrogate");
  }
}

// Residual rows r_i = dU/dtau - f(U, u, tau) for a batch with tangents.
Matrix residuals(const MlpSurrogate& net, const Cache& c, const Matrix& X,
                 const VectorField& field) {
  const int ns = net.n_state();
  const int nu = net.n_u();
  Matrix r(ns, X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) {
    const Vector u = X.col(i).segment(ns, nu);
    const double tau = X(ns + nu, i);
    r.col(i) = c.yd.col(i) - field(c.y.col(i), u, tau);
  }
  return r;
}

double mean_sq(const Matrix& e) {
  return e.cols() == 0 ? 0.0 : e.squaredNorm() / static_cast<double>(e.cols());
}

void finish(LossBreakdown& l) {
  l.total = l.residual + l.data + l.ic;
  if (!std::isfinite(l.total)) {
    throw TrainingDivergence("training loss became non-finite");
  }
}

}  // namespace

Vector forward(const MlpSurrogate& net, const Vector& x0, const Vector& u,
               double tau) {
  return run(net, net.input(x0, u, tau), false).y.col(0);
}

Vector time_derivative(const MlpSurrogate& net, const Vector& x0,
                       const Vector& u, double tau) {
  return run(net, net.input(x0, u, tau), true).yd.col(0);
}

Matrix grad_inputs(const MlpSurrogate& net, const Vector& x0, const Vector& u,
                   double tau) {
  const Cache c = run(net, net.input(x0, u, tau), false);
  const int L = net.n_layers();
  Matrix M = net.weights()[0] *
             net.normalization().scale.cwiseInverse().asDiagonal();
  for (int l = 1; l < L; ++l) {
    const Vector s = (1.0 - c.h[l].col(0).array().square()).matrix();
    M = net.weights()[l] * (s.asDiagonal() * M);
  }
  return M;
}

// ---------------------------------------------------------------------------
// Training data and loss

void TrainingSet::validate() const {
  const int n_in = n_state + n_u + 1;
  if (n_state < 1 || n_u < 0) throw DimensionError("bad training-set dimensions");
  if (n_r() + n_d() + n_0() < 1) throw ContractViolation("training set is empty");
  if (!(t_max > 0.0)) throw ContractViolation("training horizon t_max must be > 0");
  auto check = [&](const Matrix& m, const char* what, bool zero_tau) {
    if (m.cols() == 0) return;
    if (m.rows() != n_in) throw DimensionError(std::string(what) + " has wrong row count");
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      const double tau = m(n_in - 1, i);
      if (!(tau >= 0.0 && tau <= t_max) || (zero_tau && tau != 0.0)) {
        throw ContractViolation(std::string(what) + " has tau outside [0, t_max]");
      }
    }
  };
  check(collocation, "collocation set", false);
  check(data_inputs, "data set", false);
  check(ic_inputs, "initial-condition set", true);
  if (data_targets.cols() != data_inputs.cols() ||
      (n_d() > 0 && data_targets.rows() != n_state)) {
    throw DimensionError("data targets do not match data inputs");
  }
}

TrainingSet make_training_set(const VectorField& field, const OperatingBox& box,
                              double t_max, int n_r, int n_d, int n_0,
                              std::uint64_t seed, double data_dt) {
  box.validate();
  const int ns = field.n_state;
  const int nu = field.n_param;
  if (box.dim() != ns + nu) {
    throw DimensionError("training box must cover [x0; u]");
  }
  if (!(t_max > 0.0) || !(data_dt > 0.0)) {
    throw ConfigError("t_max and data_dt must be > 0");
  }
  if (n_r < 0 || n_d < 0 || n_0 < 0) throw ConfigError("point counts must be >= 0");

  Vector lo(ns + nu + 1);
  Vector hi(ns + nu + 1);
  lo << box.lo, 0.0;
  hi << box.hi, t_max;
  const OperatingBox ext(lo, hi);

  auto to_matrix = [](const std::vector<Vector>& pts, int rows) {
    Matrix m(rows, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      m.col(static_cast<Eigen::Index>(i)) = pts[i];
    }
    return m;
  };

  TrainingSet set;
  set.n_state = ns;
  set.n_u = nu;
  set.t_max = t_max;
  set.collocation = to_matrix(rotated_halton_points(ext, n_r, derive_seed(seed, 0)),
                              ns + nu + 1);
  set.data_inputs = to_matrix(rotated_halton_points(ext, n_d, derive_seed(seed, 1)),
                              ns + nu + 1);
  set.data_targets.resize(ns, n_d);
  for (int i = 0; i < n_d; ++i) {
    const Vector x0 = set.data_inputs.col(i).head(ns);
    const Vector u = set.data_inputs.col(i).segment(ns, nu);
    const double tau = set.data_inputs(ns + nu, i);
    if (tau <= 0.0) {
      set.data_targets.col(i) = x0;
      continue;
    }
    TimeGrid g;
    g.t0 = 0.0;
    g.n_steps = std::max(1, static_cast<int>(std::ceil(tau / data_dt)));
    g.dt = tau / g.n_steps;
    set.data_targets.col(i) = integrate_rk4(field, x0, u, g).final_state();
  }
  const auto ic = rotated_halton_points(box, n_0, derive_seed(seed, 2));
  set.ic_inputs.resize(ns + nu + 1, n_0);
  for (int i = 0; i < n_0; ++i) {
    set.ic_inputs.col(i) << ic[i], 0.0;
  }
  set.validate();
  return set;
}

LossAndGradient grad_params(const MlpSurrogate& net, const TrainingSet& set,
                            const VectorField& field) {
  check_field(net, field);
  if (set.n_state != net.n_state() || set.n_u != net.n_u()) {
    throw DimensionError("training set does not match the surrogate");
  }
  LossAndGradient out;
  out.gradient = Vector::Zero(net.parameter_count());
  const int ns = net.n_state();
  const int nu = net.n_u();

  if (set.n_r() > 0) {
    const Matrix& X = set.collocation;
    const Cache c = run(net, X, true);
    const Matrix r = residuals(net, c, X, field);
    out.loss.residual = mean_sq(r);
    const double w = 2.0 / static_cast<double>(X.cols());
    const Matrix gyd = w * r;
    Matrix gy(ns, X.cols());
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      const Vector u = X.col(i).segment(ns, nu);
      const Matrix J = field.state_jacobian(c.y.col(i), u, X(ns + nu, i));
      gy.col(i) = -J.transpose() * gyd.col(i);
    }
    backward(net, c, gy, gyd, out.gradient);
  }
  if (set.n_d() > 0) {
    const Cache c = run(net, set.data_inputs, false);
    const Matrix e = c.y - set.data_targets;
    out.loss.data = mean_sq(e);
    backward(net, c, (2.0 / static_cast<double>(e.cols())) * e, Matrix(),
             out.gradient);
  }
  if (set.n_0() > 0) {
    const Cache c = run(net, set.ic_inputs, false);
    const Matrix e = c.y - set.ic_inputs.topRows(ns);
    out.loss.ic = mean_sq(e);
    backward(net, c, (2.0 / static_cast<double>(e.cols())) * e, Matrix(),
             out.gradient);
  }
  finish(out.loss);
  if (!out.gradient.allFinite()) {
    throw TrainingDivergence("training gradient became non-finite");
  }
  return out;
}

LossBreakdown loss_only(const MlpSurrogate& net, const TrainingSet& set,
                        const VectorField& field) {
  check_field(net, field);
  LossBreakdown l;
  if (set.n_r() > 0) {
    const Cache c = run(net, set.collocation, true);
    l.residual = mean_sq(residuals(net, c, set.collocation, field));
  }
  if (set.n_d() > 0) {
    l.data = mean_sq(run(net, set.data_inputs, false).y - set.data_targets);
  }
  if (set.n_0() > 0) {
    l.ic = mean_sq(run(net, set.ic_inputs, false).y -
                   set.ic_inputs.topRows(net.n_state()));
  }
  finish(l);
  return l;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

TrainingSet collocation_batch(const TrainingSet& set,
                              const std::vector<Eigen::Index>& idx,
                              std::size_t begin, std::size_t end) {
  TrainingSet b = set;
  b.collocation.resize(set.collocation.rows(),
                       static_cast<Eigen::Index>(end - begin));
  for (std::size_t i = begin; i < end; ++i) {
    b.collocation.col(static_cast<Eigen::Index>(i - begin)) =
        set.collocation.col(idx[i]);
  }
  return b;
}

void train_lbfgs(TrainResult& res, const TrainingSet& set,
                 const VectorField& field, const TrainOptions& opt) {
  MlpSurrogate work = res.net;
  auto eval = [&](const Vector& theta, Vector& g) {
    work.set_flat_parameters(theta);
    try {
      auto lg = grad_params(work, set, field);
      g = lg.gradient;
      return lg.loss.total;
    } catch (const TrainingDivergence&) {
      g = Vector::Zero(theta.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  Vector theta = res.net.flat_parameters();
  auto lg0 = grad_params(res.net, set, field);
  double f = lg0.loss.total;
  Vector g = lg0.gradient;
  res.loss_history.push_back(f);
  optim::LbfgsMemory memory(opt.lbfgs_history);

  for (int it = 1; it <= opt.max_iters; ++it) {
    if (f <= opt.loss_target || g.norm() == 0.0) break;
    Vector d = memory.direction(g);
    if (!(g.dot(d) < 0.0)) {
      memory.clear();
      d = -g;
    }
    const double a0 = memory.size() == 0 ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    const auto ls = optim::strong_wolfe_search(eval, theta, f, g, d, a0);
    if (ls.decreased) {
      memory.push(ls.x - theta, ls.g - g);
      theta = ls.x;
      f = ls.f;
      g = ls.g;
    } else {
      res.events.push_back({it, "line search failed; took a gradient step of 1e-4"});
      memory.clear();
      const Vector next = theta - 1e-4 * g;
      Vector gn;
      const double fn = eval(next, gn);
      if (!std::isfinite(fn)) {
        throw TrainingDivergence("training diverged after line-search fallback");
      }
      theta = next;
      f = fn;
      g = gn;
    }
    res.loss_history.push_back(f);
  }
  res.net.set_flat_parameters(theta);
}

void train_adam(TrainResult& res, const TrainingSet& set,
                const VectorField& field, const TrainOptions& opt) {
  optim::Adam adam(opt.adam_lr);
  Vector theta = res.net.flat_parameters();
  MlpSurrogate work = res.net;
  const bool batched = opt.batch_size > 0 && opt.batch_size < set.n_r();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(set.n_r()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(opt.seed);
  std::size_t cursor = order.size();

  auto full = grad_params(work, set, field);
  res.loss_history.push_back(full.loss.total);
  for (int it = 1; it <= opt.max_iters; ++it) {
    if (full.loss.total <= opt.loss_target) break;
    Vector g;
    if (batched) {
      if (cursor + static_cast<std::size_t>(opt.batch_size) > order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto b = collocation_batch(set, order, cursor,
                                       cursor + static_cast<std::size_t>(opt.batch_size));
      cursor += static_cast<std::size_t>(opt.batch_size);
      g = grad_params(work, b, field).gradient;
    } else {
      g = full.gradient;
    }
    theta += adam.step(g);
    work.set_flat_parameters(theta);
    full = grad_params(work, set, field);
    res.loss_history.push_back(full.loss.total);
  }
  res.net = work;
}

}  // namespace

TrainResult train(const MlpSurrogate& net, const TrainingSet& set,
                  const VectorField& field, const TrainOptions& options) {
  net.validate();
  set.validate();
  check_field(net, field);
  if (options.max_iters < 0) throw ConfigError("max_iters must be >= 0");
  TrainResult res;
  res.net = net;
  if (res.net.t_max() == 0.0) res.net.set_t_max(set.t_max);
  if (options.max_iters == 0) {
    res.loss_history.push_back(loss_only(net, set, field).total);
    return res;
  }
  if (options.optimizer == OptimizerKind::kLbfgs) {
    train_lbfgs(res, set, field, options);
  } else {
    train_adam(res, set, field, options);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Trajectories

namespace {

struct HopPlan {
  int hop = 0;
  double local_tau = 0.0;
};

HopPlan plan(double tau, double t_max) {
  if (t_max <= 0.0 || tau <= t_max) return {0, tau};
  // Grid times sitting on a hop boundary stay in the earlier hop.
  int h = static_cast<int>(std::ceil(tau / t_max - 1e-9)) - 1;
  h = std::max(h, 0);
  return {h, tau - static_cast<double>(h) * t_max};
}

void check_grid(const MlpSurrogate& net, const TimeGrid& grid) {
  grid.validate();
  if (net.t_max() > 0.0 && grid.dt > net.t_max() * (1.0 + 1e-12)) {
    throw ContractViolation("grid dt exceeds the surrogate horizon t_max");
  }
}

// anchors[m] is the state the surrogate restarts from at m * t_max.
std::vector<Vector> anchors(const MlpSurrogate& net, const Vector& x0,
                            const Vector& u, int hops) {
  std::vector<Vector> a{x0};
  for (int m = 1; m <= hops; ++m) a.push_back(forward(net, a.back(), u, net.t_max()));
  return a;
}

int last_hop(const MlpSurrogate& net, const TimeGrid& grid) {
  return plan(grid.horizon(), net.t_max()).hop;
}

}  // namespace

Trajectory surrogate_trajectory(const MlpSurrogate& net, const Vector& x0,
                                const Vector& u, const TimeGrid& grid) {
  check_grid(net, grid);
  const auto a = anchors(net, x0, u, last_hop(net, grid));
  Trajectory traj;
  traj.grid = grid;
  traj.states.resize(grid.n_points(), net.n_state());
  for (int k = 0; k < grid.n_points(); ++k) {
    const HopPlan p = plan(static_cast<double>(k) * grid.dt, net.t_max());
    traj.states.row(k) = forward(net, a[p.hop], u, p.local_tau).transpose();
  }
  return traj;
}

Matrix surrogate_time_derivative(const MlpSurrogate& net, const Vector& x0,
                                 const Vector& u, const TimeGrid& grid) {
  check_grid(net, grid);
  const auto a = anchors(net, x0, u, last_hop(net, grid));
  Matrix d(grid.n_points(), net.n_state());
  for (int k = 0; k < grid.n_points(); ++k) {
    const HopPlan p = plan(static_cast<double>(k) * grid.dt, net.t_max());
    d.row(k) = time_derivative(net, a[p.hop], u, p.local_tau).transpose();
  }
  return d;
}

Trajectory MlpTrajectoryModel::simulate(const Vector& x0, const Vector& u,
                                        const TimeGrid& grid) const {
  return surrogate_trajectory(net_, x0, u, grid);
}

Matrix MlpTrajectoryModel::row_jacobian(const Vector& x0, const Vector& u,
                                        const TimeGrid& grid, int k) const {
  check_grid(net_, grid);
  if (k < 0 || k > grid.n_steps) throw DimensionError("row index out of range");
  const int ns = net_.n_state();
  const int nu = net_.n_u();
  const HopPlan p = plan(static_cast<double>(k) * grid.dt, net_.t_max());
  // D = d anchor / d [x0; u], propagated hop by hop.
  Matrix D = Matrix::Zero(ns, ns + nu);
  D.leftCols(ns).setIdentity();
  Vector anchor = x0;
  for (int m = 1; m <= p.hop; ++m) {
    const Matrix J = grad_inputs(net_, anchor, u, net_.t_max());
    Matrix next = J.leftCols(ns) * D;
    next.rightCols(nu) += J.middleCols(ns, nu);
    D = next;
    anchor = forward(net_, anchor, u, net_.t_max());
  }
  const Matrix J = grad_inputs(net_, anchor, u, p.local_tau);
  Matrix out = J.leftCols(ns) * D;
  out.rightCols(nu) += J.middleCols(ns, nu);
  return out;
}

}  // namespace surrovv

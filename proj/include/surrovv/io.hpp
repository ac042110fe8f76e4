#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace surrovv::io {

/// Shortest decimal form that round-trips; "inf"/"-inf"/"nan"
/// for non-finite values.
std::string format_double(double v);

/// Minimal CSV table: a header plus rows of pre-formatted cells.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }

  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Reads a comma-separated file with a header line.
CsvTable read_csv(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace surrovv::io

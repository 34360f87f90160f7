#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace tiltrotor {

/// Comma-separated table without quoting (no field in our schemas contains a comma).
struct CsvTable {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  ///< 1-based line of each row

  /// Column index by header name; throws IoError when absent.
  std::size_t column(std::string_view name) const;
  double number(std::size_t row, std::size_t col) const;
  std::vector<double> numeric_row(std::size_t row) const;
};

/// Reads a CSV file. With header_optional, a first line that does not parse as
/// numbers is taken as the header; otherwise the first line is always the header.
/// Blank lines and lines starting with '#' are skipped.
CsvTable read_csv(const std::filesystem::path& path, bool header_optional = false);

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// Writes a header on construction and one line per row. Errors carry the path.
class CsvWriter {
 public:
  /// `preamble` lines are written first, each prefixed with "# ".
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
            const std::vector<std::string>& preamble = {});
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<double>& values);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
};

}  // namespace tiltrotor

#include "tiltrotor/csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "tiltrotor/errors.hpp"

namespace tiltrotor {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw IoError(source.string() + ": missing column '" + std::string(name) + "'");
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const auto& cells = rows.at(row);
  double v = 0.0;
  if (col >= cells.size() || !parse_double(cells[col], v)) {
    throw IoError(source.string() + ":" + std::to_string(line_numbers.at(row)) + ": column " +
                  std::to_string(col + 1) + " is not a number");
  }
  return v;
}

std::vector<double> CsvTable::numeric_row(std::size_t row) const {
  std::vector<double> out(rows.at(row).size());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = number(row, c);
  return out;
}

CsvTable read_csv(const std::filesystem::path& path, bool header_optional) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable t;
  t.source = path;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line[0] == '#') continue;
    std::vector<std::string> cells = split(line);
    if (first) {
      first = false;
      bool numeric = header_optional;
      double v = 0.0;
      for (const auto& c : cells) numeric = numeric && parse_double(c, v);
      if (!numeric) {
        t.header = std::move(cells);
        continue;
      }
    }
    t.rows.push_back(std::move(cells));
    t.line_numbers.push_back(line_no);
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return t;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header,
                     const std::vector<std::string>& preamble)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
  if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  for (const std::string& line : preamble) out_ << "# " << line << '\n';
  row(header);
}

CsvWriter::~CsvWriter() {
  if (out_.is_open()) out_.close();
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (const double v : values) cells.push_back(format_double(v));
  row(cells);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw IoError(path_.string() + ": row has " + std::to_string(cells.size()) + " cells, header has " +
                  std::to_string(columns_));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
  if (!out_) throw IoError("write error on " + path_.string());
}

void CsvWriter::close() {
  out_.flush();
  if (!out_) throw IoError("write error on " + path_.string());
  out_.close();
}

}  // namespace tiltrotor

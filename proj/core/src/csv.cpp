#include "dealmvc/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dealmvc/errors.hpp"

namespace dealmvc::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell, const std::filesystem::path& path, std::size_t line_no) {
  cell = trim(cell);
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || cell.empty() || !std::isfinite(value)) {
    raise(ErrorKind::InvalidInput,
          path.string() + ":" + std::to_string(line_no) + ": not a finite number: '" +
              std::string(cell) + "'");
  }
  return value;
}

}  // namespace

Eigen::MatrixXd read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::IOFailure, "cannot open " + path.string());

  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    while (true) {
      auto comma = rest.find(',');
      row.push_back(parse_cell(rest.substr(0, comma), path, line_no));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      raise(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) +
                                         ": ragged row (expected " + std::to_string(width) +
                                         " cells, got " + std::to_string(row.size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::IOFailure, "cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_value(m(i, j));
    }
    out << '\n';
  }
  if (!out) raise(ErrorKind::IOFailure, "write failed: " + path.string());
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::IOFailure, "cannot open " + path.string());
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto cell = trim(line);
    if (cell.empty()) continue;
    int value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
      raise(ErrorKind::InvalidInput,
            path.string() + ":" + std::to_string(line_no) + ": not an integer label");
    }
    labels.push_back(value);
  }
  return labels;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) raise(ErrorKind::IOFailure, "cannot write " + path.string());
  for (int label : labels) out << label << '\n';
  if (!out) raise(ErrorKind::IOFailure, "write failed: " + path.string());
}

}  // namespace dealmvc::csv

#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

namespace dealmvc::csv {

// Comma-separated numeric matrix, one row per sample, no header. Parsing is
// strict: every cell must be a finite number, rows must have equal width.
Eigen::MatrixXd read_matrix(const std::filesystem::path& path);
void write_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

// Label file: one integer per line.
std::vector<int> read_labels(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

// Round-trip formatting for a double ("%.17g").
std::string format_value(double v);

}  // namespace dealmvc::csv

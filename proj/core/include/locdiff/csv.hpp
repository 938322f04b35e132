#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <vector>

#include "locdiff/diffusion.hpp"

namespace locdiff {

/// Shortest decimal string that round-trips the double exactly.
std::string format_double(double x);

/// Parses a double; throws ArgumentError on garbage.
double parse_double(const std::string& s);

/// Column-oriented numeric table; written with full round-trip precision.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t n_rows() const { return columns.empty() ? 0 : columns.front().size(); }
  void add_column(std::string name, std::vector<double> values);
  void write(const std::filesystem::path& path) const;
  static CsvTable read(const std::filesystem::path& path);
};

/// Dense matrix as CSV, one row per line, optional header row.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, bool expect_header);

/// SampleBatch CSV (header x0,...,x{d-1}) plus a JSON sidecar with seed and
/// schedule metadata at <path>.meta.json.
void write_sample_batch(const std::filesystem::path& path, const SampleBatch& batch);
SampleBatch read_sample_batch(const std::filesystem::path& path);

}  // namespace locdiff

#include "locdiff/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "locdiff/errors.hpp"

namespace locdiff {

std::string format_double(double x) {
  char buf[48];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v{};
  const char* first = s.data();
  const char* last = s.data() + s.size();
  while (first != last && (*first == ' ' || *first == '\t')) ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{}) throw ArgumentError("parse_double: bad number '" + s + "'");
  return v;
}

void CsvTable::add_column(std::string name, std::vector<double> values) {
  if (!columns.empty() && values.size() != columns.front().size())
    throw ArgumentError("csv: column '" + name + "' length mismatch");
  header.push_back(std::move(name));
  columns.push_back(std::move(values));
}

void CsvTable::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ArgumentError("csv: cannot open " + path.string());
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << "\n";
  for (std::size_t r = 0; r < n_rows(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << (c ? "," : "") << format_double(columns[c][r]);
    out << "\n";
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable CsvTable::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ArgumentError("csv: empty file " + path.string());
  CsvTable t;
  t.header = split_csv_line(line);
  t.columns.resize(t.header.size());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != t.header.size())
      throw ArgumentError("csv: ragged row in " + path.string());
    for (std::size_t c = 0; c < fields.size(); ++c) t.columns[c].push_back(parse_double(fields[c]));
  }
  return t;
}

void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw ArgumentError("csv: cannot open " + path.string());
  if (!header.empty()) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols())
      throw ArgumentError("csv: header width mismatch");
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << "\n";
  }
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << (c ? "," : "") << format_double(m(r, c));
    out << "\n";
  }
}

Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path, bool expect_header) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("csv: cannot open " + path.string());
  std::string line;
  if (expect_header && !std::getline(in, line))
    throw ArgumentError("csv: empty file " + path.string());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    std::vector<double> row;
    row.reserve(fields.size());
    for (const auto& f : fields) row.push_back(parse_double(f));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ArgumentError("csv: ragged row in " + path.string());
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return m;
}

void write_sample_batch(const std::filesystem::path& path, const SampleBatch& batch) {
  std::vector<std::string> header;
  header.reserve(static_cast<std::size_t>(batch.dimension()));
  for (int c = 0; c < batch.dimension(); ++c) header.push_back("x" + std::to_string(c));
  write_matrix_csv(path, batch.data, header);

  nlohmann::json meta;
  meta["seed"] = batch.seed;
  meta["schedule"] = batch.schedule_id;
  meta["n_samples"] = batch.n_samples();
  meta["dimension"] = batch.dimension();
  std::ofstream out(path.string() + ".meta.json");
  out << meta.dump(2) << "\n";
}

SampleBatch read_sample_batch(const std::filesystem::path& path) {
  SampleBatch batch;
  batch.data = read_matrix_csv(path, /*expect_header=*/true);
  std::ifstream meta_in(path.string() + ".meta.json");
  if (meta_in) {
    nlohmann::json meta = nlohmann::json::parse(meta_in);
    batch.seed = meta.value("seed", 0ULL);
    batch.schedule_id = meta.value("schedule", std::string{});
  }
  return batch;
}

}  // namespace locdiff

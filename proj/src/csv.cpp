#include "formnet/csv.hpp"

#include <cstdio>

namespace formnet {

CsvWriter::CsvWriter(const std::string& path, const std::string& provenance,
                     const std::vector<std::string>& columns)
    : out_(path), columns_(columns.size()) {
  require(out_.good(), "csv.io", "cannot open output file: " + path);
  out_ << provenance << "\n";
  for (size_t i = 0; i < columns.size(); ++i)
    out_ << columns[i] << (i + 1 < columns.size() ? "," : "");
  out_ << "\n";
}

std::string CsvWriter::format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void CsvWriter::row(const std::vector<double>& values) {
  require(values.size() == columns_, "csv.shape", "row width does not match header");
  for (size_t i = 0; i < values.size(); ++i)
    out_ << format(values[i]) << (i + 1 < values.size() ? "," : "");
  out_ << "\n";
}

void CsvWriter::row(const std::vector<std::string>& cells) {
  require(cells.size() == columns_, "csv.shape", "row width does not match header");
  for (size_t i = 0; i < cells.size(); ++i)
    out_ << cells[i] << (i + 1 < cells.size() ? "," : "");
  out_ << "\n";
}

std::string provenance_line(const std::string& scenario_name, std::uint64_t seed,
                            std::uint64_t config_hash) {
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash));
  return "# formnet scenario=" + scenario_name + " seed=" + std::to_string(seed) +
         " rng=mt19937_64 config_hash=" + hash;
}

}  // namespace formnet

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "formnet/error.hpp"

namespace formnet {

// CSV emitter with a fixed column order, 12-significant-digit numbers, and a
// leading comment row carrying the provenance needed to reproduce the file.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& provenance,
            const std::vector<std::string>& columns);

  void row(const std::vector<double>& values);
  // mixed rows (e.g. a trailing mode label)
  void row(const std::vector<std::string>& cells);

  static std::string format(double v);

 private:
  std::ofstream out_;
  size_t columns_;
};

// "# formnet scenario=<name> seed=<n> rng=<alg> config_hash=<hex>"
std::string provenance_line(const std::string& scenario_name, std::uint64_t seed,
                            std::uint64_t config_hash);

}  // namespace formnet

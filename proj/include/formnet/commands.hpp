#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "formnet/scenario.hpp"

namespace formnet {

// Command-line overrides layered on top of the scenario file before parsing;
// the effective configuration echoed to outputs reflects them.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> m_mode;        // "euclidean" | "per-edge"
  std::optional<std::string> steady_state;  // "oracle" | "simulate"
  std::optional<double> dt;
  std::optional<double> t_max;
  std::optional<double> h;
  std::optional<int> max_iter;
};

// Runs one subcommand (simulate, experiment, estimate-m, synthesize, iterate,
// ramp, case-study, verify) against a scenario file, writing CSV outputs and
// the effective configuration into out_dir. Returns the process exit code:
// 0 success / goal met, 1 goal or verification failed, 2 invalid input,
// 3 numerical failure. Errors also produce out_dir/error.json.
int run_subcommand(const std::string& command, const std::string& scenario_path,
                   const std::string& out_dir, const RunOverrides& overrides = {});

}  // namespace formnet

#include <string>

#include <CLI11.hpp>

#include "formnet/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"formnet: simulation and data-driven gain synthesis for diffusively "
               "coupled multi-agent networks"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir = "out";
  formnet::RunOverrides ov;
  std::uint64_t seed = 0;
  double dt = 0.0, t_max = 0.0, h = 0.0;
  int max_iter = 0;
  std::string m_mode, steady_state;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", scenario_path, "scenario JSON file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", out_dir, "output directory (default: out)");
    cmd->add_option("--seed", seed, "override the scenario seed")
        ->each([&](const std::string&) { ov.seed = seed; });
    cmd->add_option("--m-mode", m_mode, "M computation mode")
        ->check(CLI::IsMember({"euclidean", "per-edge", "per_edge"}))
        ->each([&](const std::string&) { ov.m_mode = m_mode; });
    cmd->add_option("--steady-state", steady_state, "steady-state evaluator")
        ->check(CLI::IsMember({"oracle", "simulate"}))
        ->each([&](const std::string&) { ov.steady_state = steady_state; });
    cmd->add_option("--dt", dt, "integration step override")
        ->each([&](const std::string&) { ov.dt = dt; });
    cmd->add_option("--t-max", t_max, "simulation horizon override")
        ->each([&](const std::string&) { ov.t_max = t_max; });
    cmd->add_option("--h", h, "iterative step size override")
        ->each([&](const std::string&) { ov.h = h; });
    cmd->add_option("--max-iter", max_iter, "iteration cap override")
        ->each([&](const std::string&) { ov.max_iter = max_iter; });
  };

  const char* subcommands[] = {"simulate",  "experiment", "estimate-m", "synthesize",
                               "iterate",   "ramp",       "case-study", "verify"};
  const char* descriptions[] = {
      "integrate the closed loop and test the formation goal",
      "run the bracketing experiments for every agent",
      "estimate the per-agent passivity bounds m_i",
      "estimate m, compute M and the uniform gain alpha",
      "iterative multi-gain tuning until the goal is met",
      "slow uniform-gain ramp over a schedule",
      "full pipeline: experiments, synthesis, closed-loop verification",
      "cross-check oracle, simulation and relation consistency"};
  for (int i = 0; i < 8; ++i) add_common(app.add_subcommand(subcommands[i], descriptions[i]));

  CLI11_PARSE(app, argc, argv);
  return formnet::run_subcommand(app.get_subcommands().front()->get_name(),
                                 scenario_path, out_dir, ov);
}

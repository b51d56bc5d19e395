#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "formnet/synthesis.hpp"

namespace formnet {

// Declarative description of a runnable instance, parsed from JSON. Numeric
// defaults are filled at load time; `effective_json` echoes the result so a
// run is reproducible from its own output.
struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 0;

  // graph
  std::string graph_family = "path";  // path | cycle | complete | star | explicit
  int graph_n = 2;
  std::vector<Edge> graph_edges;  // explicit family only

  // agents: either one explicit spec per vertex or a seeded vehicle family
  struct AgentSpec {
    std::string model;  // integrator | vehicle_drag | lti_first_order | custom_polynomial
    double c_d = 1.0;
    double w = 0.0;
    double s = 1.0;
    std::vector<double> f_coeffs, h_coeffs;  // custom_polynomial
  };
  std::vector<AgentSpec> agents;  // empty when randomized
  bool random_vehicles = false;
  double cd_lo = 0.1, cd_hi = 10.0;
  double w_lo = -2.0, w_hi = 2.0;

  std::string controller_type = "proportional";  // proportional | integrator

  // goal
  Eigen::VectorXd zeta_star;  // broadcast from a scalar when given as one
  double epsilon = 0.2;
  std::optional<Eigen::VectorXd> y_star;

  // gains for plain simulation runs
  Eigen::VectorXd gains;

  // initial conditions
  std::string x0_policy = "zeros";  // zeros | random | explicit
  double x0_lo = -5.0, x0_hi = 5.0;
  Eigen::VectorXd x0_values;

  SimOptions sim;
  double tol_experiment = 1e-6;
  double experiment_t_max = 300.0;

  // synthesis parameters
  MiMethod method = MiMethod::three_experiments;
  MMode m_mode = MMode::per_edge;
  int measurements_per_agent = 3;
  double beta_small = 0.01;
  double beta_third = 1.0;
  double third_offset_factor = 10.0;
  double beta_refine = 10.0;
  double h_step = 2.0;
  Eigen::VectorXd a0;  // broadcast from scalar
  int max_iterations = 200;
  SteadyStateMode steady_state = SteadyStateMode::oracle;
  std::vector<double> ramp_schedule = {1.0, 10.0, 100.0, 1000.0};

  MeipCheckOptions meip;

  std::string effective_json;  // canonical dump with defaults filled
  std::uint64_t config_hash = 0;

  Graph graph() const;
  // Materializes the network; randomized families draw from a generator
  // seeded with `seed` in agent order.
  Network build_network() const;
  Eigen::VectorXd initial_state(const Network& net) const;
  Algorithm1Options algorithm1_options() const;
  SynthesisOptions synthesis_options() const;
};

// Parses and validates a scenario file. Schema violations throw
// "scenario.schema" errors naming the offending field path; a zeta_star
// outside Im(E^T) throws "scenario.invalid".
Scenario parse_scenario(const std::string& path);
Scenario parse_scenario_text(const std::string& text, const std::string& origin);

}  // namespace formnet

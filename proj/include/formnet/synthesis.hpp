#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "formnet/numeric.hpp"
#include "formnet/simulation.hpp"

namespace formnet {

struct SteadyStatePair {
  double u = 0.0;
  double y = 0.0;
};

// Two-pair bound m_i <= u* (y* - y0) from a target pair and a zero-input pair.
double estimate_mi_two_point(const SteadyStatePair& pair_star,
                             const SteadyStatePair& pair_zero, double zero_tol = 1e-6);

// Chain bound from r+2 relation-consistent pairs:
//   sum_k U_k (Y_k - Y_{k-1}) + U_{r+1} (y* - Y_r)
// after sorting so Y_0 <= ... <= Y_r <= y* <= Y_{r+1} and U_0 <= 0 <= U_1 <= ...
// Targets left of the zero-input output are handled by mirroring (u, y) ->
// (-u, -y). Monotonicity violations and missing brackets are rejected.
double estimate_mi_chain(std::vector<SteadyStatePair> pairs, double y_star);

struct MiBracket {
  double y0_lo = 0.0, y0_hi = 0.0;      // bracket of the zero-input output
  double ustar_lo = 0.0, ustar_hi = 0.0;  // bracket of the target input
};

struct MiEstimate {
  double m_hat = 0.0;
  MiBracket bracket;
  std::vector<ExperimentRecord> experiments;
};

// The sort-and-bracket tail of the three-experiment estimator, usable
// directly on measured pairs. Pairs are (low-gain +ref, low-gain -ref, third).
MiEstimate algorithm1_bound_from_pairs(const SteadyStatePair& plus,
                                       const SteadyStatePair& minus,
                                       const SteadyStatePair& third, double y_star);

struct Algorithm1Options {
  double beta_small = 0.01;
  double beta_third = 1.0;
  // y_ref for the third experiment: y* +/- offset_factor * max(1, |y*|)
  double third_offset_factor = 10.0;
  ExperimentOptions experiment;
};

// Runs the three closed-loop experiments (refs +1/beta, -1/beta, then far
// above or below y* as branched on the first result) and returns the bound
// with its brackets. Throws if any experiment fails to converge.
MiEstimate algorithm1_estimate_mi(const Agent& agent, int agent_id, double y_star,
                                  const Algorithm1Options& opts = {});

// Exact m_i for a declared-LTI agent from one steady-state pair:
// (y*)^2 u / (2 y). Pairs with u = 0 but y != 0 are rejected.
double estimate_mi_lti(const SteadyStatePair& pair, double y_star);

enum class MMode { euclidean, per_edge };

inline const char* to_string(MMode m) {
  return m == MMode::euclidean ? "euclidean" : "per_edge";
}

// Gain denominator M. Euclidean mode minimizes the controller potential over
// the radius-epsilon sphere around zeta_star inside Im(E^T); per-edge mode is
// the |E| epsilon^2 arithmetic used with quadratic potentials.
double compute_M(const std::vector<const StaticController*>& controllers,
                 const Eigen::VectorXd& zeta_star, double epsilon,
                 const Eigen::MatrixXd& incidence, MMode mode, std::uint64_t seed = 0);

enum class MiMethod { three_experiments, chain, lti_exact, oracle_true };

struct SynthesisOptions {
  MiMethod method = MiMethod::three_experiments;
  MMode m_mode = MMode::per_edge;
  int measurements_per_agent = 3;  // chain method only
  double beta_refine = 10.0;       // gain for refinement experiments
  Algorithm1Options algorithm1;
  std::uint64_t seed = 0;  // refinement reference draws
};

struct AgentEstimate {
  int agent_id = 0;
  double m_hat = 0.0;
  MiBracket bracket;
  int measurements = 0;
};

struct EstimateReport {
  std::vector<AgentEstimate> per_agent;
  std::vector<ExperimentRecord> experiments;
  double m_hat = 0.0;
  double M_euclidean = 0.0;
  double M_per_edge = 0.0;
  double alpha = 0.0;  // m_hat / M for the selected mode
  MMode mode = MMode::per_edge;
  Eigen::VectorXd y_star;
};

// Uniform-gain synthesis: per-agent estimates with the chosen method, both M
// values, and alpha = m_hat / M for the selected mode. y_star defaults to the
// minimum-norm solution of E^T y = zeta_star unless overridden.
EstimateReport algorithm2_uniform_gain(const Network& net,
                                       const Eigen::VectorXd& zeta_star, double epsilon,
                                       const SynthesisOptions& opts,
                                       std::optional<Eigen::VectorXd> y_star_override =
                                           std::nullopt);

enum class SteadyStateMode { oracle, simulate };

struct IterationRow {
  int j = 0;
  Eigen::VectorXd gains;
  double gain_norm = 0.0;
  double F = 0.0;    // squared formation error
  double eps = 0.0;  // ||E^T y - zeta_star||
  Eigen::VectorXd v;
};

struct IterationLog {
  std::vector<IterationRow> rows;
  bool halted = false;
};

struct IterateOptions {
  double h = 2.0;
  int max_iterations = 200;
  SteadyStateMode mode = SteadyStateMode::oracle;
  SimOptions sim;  // simulate mode only; dt adapted to the gains per step
  double solver_tolerance = 1e-10;
};

struct IterateResult {
  Eigen::VectorXd gains;
  IterationLog log;
};

// Iterative multi-gain tuning: update a <- a + h v with the dead-zone descent
// direction until ||E^T y(a) - zeta_star|| <= epsilon. Gains driven
// nonpositive throw "synthesis.step_too_large"; hitting the iteration cap
// returns a non-halted log.
IterateResult algorithm3_iterate(const Network& net, const Eigen::VectorXd& zeta_star,
                                 double epsilon, const Eigen::VectorXd& a0,
                                 const IterateOptions& opts = {});

struct RampResult {
  double alpha = 0.0;
  std::vector<std::pair<double, double>> attempts;  // (alpha, achieved distance)
};

// Slow uniform-gain ramp: walk the increasing schedule, simulate to
// convergence, and return the first gain meeting the goal. Throws
// "synthesis.schedule_exhausted" with the last distance otherwise.
RampResult slow_ramp(const Network& net, const Eigen::VectorXd& zeta_star,
                     double epsilon, const std::vector<double>& schedule,
                     SteadyStateMode mode, const SimOptions& sim);

}  // namespace formnet

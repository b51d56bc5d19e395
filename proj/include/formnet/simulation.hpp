#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "formnet/network.hpp"

namespace formnet {

// Sampled closed-loop trajectory. The wiring identities zeta = E^T y and
// u = -E diag(a) mu are definitions and are recomputed at every recorded
// sample. `xdot` is stored so convergence can be judged from the record alone.
struct Trajectory {
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x, xdot, u, y, zeta, mu;

  int samples() const { return static_cast<int>(t.size()); }
};

struct SimOptions {
  double dt = 1e-3;
  double t_max = 50.0;
  int record_stride = 10;
  // When set, integration stops once the trailing-window test passes.
  bool stop_on_convergence = false;
  double window = 1.0;
  double tolerance = 1e-4;
};

// Fixed-step RK4 integration of the diffusively coupled loop. eta0 sizes the
// controller state and may be empty when every controller is static. Throws
// "simulation.blow_up" on non-finite states.
Trajectory integrate_network(const Network& net, const Eigen::VectorXd& gains,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& eta0,
                             const SimOptions& opts);

struct ConvergenceResult {
  bool converged = false;
  Eigen::VectorXd y_ss;  // trailing-window averages when converged
  Eigen::VectorXd u_ss;
};

// Converged iff every output's peak-to-peak variation over the trailing
// window is below tol and the final ||xdot||_inf is below tol.
ConvergenceResult detect_convergence(const Trajectory& traj, double window, double tol);

// Outcome of one closed-loop gain experiment u = beta (y_ref - y).
struct ExperimentRecord {
  int agent_id = 0;
  double beta = 0.0;
  double y_ref = 0.0;
  double u_ss = 0.0;
  double y_ss = 0.0;
  bool converged = false;
  double t_end = 0.0;
};

struct ExperimentOptions {
  double dt = 1e-3;
  double t_max = 300.0;
  double window = 1.0;
  double tolerance = 1e-6;
  double x0 = 0.0;
};

// Runs a single agent under proportional output feedback toward y_ref until
// the convergence test passes (or t_max). A non-converged record is returned
// rather than thrown; callers decide whether to retry longer.
ExperimentRecord closed_loop_experiment(const Agent& agent, int agent_id, double beta,
                                        double y_ref, const ExperimentOptions& opts);

// Largest fixed step that keeps RK4 stable for the given gains, from a bound
// on the closed-loop Jacobian (gain * largest Laplacian eigenvalue * max
// controller slope plus an agent-rate allowance).
double stable_time_step(const Network& net, const Eigen::VectorXd& gains,
                        double dt_base);

}  // namespace formnet

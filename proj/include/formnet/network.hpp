#pragma once

#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "formnet/graph.hpp"
#include "formnet/relations.hpp"
#include "formnet/systems.hpp"

namespace formnet {

// A diffusively coupled network: agents on the vertices, controllers on the
// edges, wired by zeta = E^T y and u = -E diag(a) mu.
struct Network {
  Graph graph;
  Eigen::MatrixXd incidence;
  std::vector<std::shared_ptr<const Agent>> agents;
  std::vector<std::shared_ptr<const EdgeController>> controllers;

  static Network make(Graph g, std::vector<std::shared_ptr<const Agent>> agents,
                      std::vector<std::shared_ptr<const EdgeController>> controllers);

  int num_agents() const { return graph.num_vertices(); }
  int num_edges() const { return graph.num_edges(); }
  bool all_static_controllers() const;
};

// Steady-state equation data: relations k_i^{-1} with potentials K_i*, static
// controller maps gamma_e with potentials Gamma_e, and positive edge gains.
// Steady-state outputs satisfy k^{-1}(y) + E diag(a) gamma(E^T y) = 0.
class SteadyStateProblem {
 public:
  SteadyStateProblem(const Network& net, Eigen::VectorXd gains,
                     Interval relation_domain = {-50.0, 50.0}, int relation_grid = 2001);

  SteadyStateProblem with_gains(Eigen::VectorXd gains) const;

  const Eigen::MatrixXd& incidence() const { return incidence_; }
  const Eigen::VectorXd& gains() const { return gains_; }
  int num_agents() const { return static_cast<int>(relations_.size()); }
  int num_edges() const { return static_cast<int>(controllers_.size()); }
  const MonotoneRelation& relation(int i) const { return *relations_[i]; }
  const StaticController& controller(int e) const { return *controllers_[e]; }
  // All agent relations identically zero (pure integrator network): the
  // steady state is unique only up to consensus shifts and gets mean-pinned.
  bool translation_invariant() const { return all_flat_; }

  Eigen::VectorXd inverse_relation(const Eigen::VectorXd& y) const;
  Eigen::VectorXd inverse_relation_derivative(const Eigen::VectorXd& y) const;
  Eigen::VectorXd controller_map(const Eigen::VectorXd& zeta) const;
  Eigen::VectorXd controller_map_derivative(const Eigen::VectorXd& zeta) const;

  double agent_potential(const Eigen::VectorXd& y) const;        // sum K_i*(y_i)
  double controller_potential(const Eigen::VectorXd& zeta) const;  // sum a_e Gamma_e
  // K*(y) + sum_e a_e Gamma_e((E^T y)_e), the objective whose minimizers are
  // the network's steady-state outputs.
  double objective(const Eigen::VectorXd& y) const;
  // k^{-1}(y) + E diag(a) gamma(E^T y); also the objective's gradient.
  Eigen::VectorXd residual(const Eigen::VectorXd& y) const;

  // K_i(u) and a_e-scaled conjugate of the controller potential, by exact
  // monotone inversion of the subgradient.
  double agent_primal(int i, double u) const;
  double controller_conjugate(int e, double mu_raw) const;

 private:
  Eigen::MatrixXd incidence_;
  Eigen::VectorXd gains_;
  std::vector<std::shared_ptr<const MonotoneRelation>> relations_;
  std::vector<std::shared_ptr<const StaticController>> controllers_;
  bool all_flat_ = false;
};

struct SolveOptions {
  double tolerance = 1e-8;  // infinity norm of the residual
  int max_iterations = 500;
  std::optional<Eigen::VectorXd> initial_y;
};

struct SteadyStateSolution {
  Eigen::VectorXd y;
  Eigen::VectorXd zeta;
  double residual_inf = 0.0;
  int iterations = 0;
  bool mean_pinned = false;
};

// Damped-Newton descent with Armijo backtracking on the convex objective.
// Throws "network.no_convergence" with the residual when the iteration cap is
// hit.
SteadyStateSolution solve_network_steady_state(const SteadyStateProblem& p,
                                               const SolveOptions& opts = {});

// Optimal potential / optimal flow objectives. `mu` holds the amplified edge
// flows, so the flow constraint reads u = -E mu. Constraint violations throw.
double opp_objective(const SteadyStateProblem& p, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& zeta);
double ofp_objective(const SteadyStateProblem& p, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& mu);
// Sum of the Fenchel residuals of both problems; zero exactly at a network
// steady state, positive elsewhere.
double duality_gap(const SteadyStateProblem& p, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& zeta, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& mu);

struct SensitivityMatrix {
  Eigen::MatrixXd X;
  double min_eigenvalue = 0.0;  // of X; positive iff the inner matrix is PD
};

// X(y) = [diag(dk^{-1}) + E diag(a * dgamma) E^T]^{-1}. Throws
// "network.singular" when the inner matrix is not positive definite.
SensitivityMatrix sensitivity_matrix(const SteadyStateProblem& p,
                                     const Eigen::VectorXd& y);

// Gradient of F(a) = ||E^T y(a) - zeta_star||^2 at the solved steady state y:
// -2 diag(gamma(zeta)) E^T X(y) E (zeta - zeta_star).
Eigen::VectorXd formation_error_gradient(const SteadyStateProblem& p,
                                         const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& zeta_star);

// Gain update direction: v_e = (zeta_e - zeta_star_e) / gamma_e(zeta_e) on
// edges where |gamma_e| exceeds the dead-zone threshold, else 0. Satisfies
// v^T grad F <= 0.
Eigen::VectorXd descent_direction(const SteadyStateProblem& p, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& zeta_star,
                                  double dead_zone = 1e-12);

}  // namespace formnet

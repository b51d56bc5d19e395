#include "formnet/network.hpp"

#include <cmath>

#include "formnet/numeric.hpp"

namespace formnet {

Network Network::make(Graph g, std::vector<std::shared_ptr<const Agent>> agents,
                      std::vector<std::shared_ptr<const EdgeController>> controllers) {
  require(static_cast<int>(agents.size()) == g.num_vertices(), "network.invalid",
          "agent count does not match vertex count");
  require(static_cast<int>(controllers.size()) == g.num_edges(), "network.invalid",
          "controller count does not match edge count");
  for (const auto& a : agents)
    require(static_cast<bool>(a), "network.invalid", "null agent");
  for (const auto& c : controllers)
    require(static_cast<bool>(c), "network.invalid", "null controller");
  Eigen::MatrixXd inc = incidence_matrix(g);
  return Network{std::move(g), std::move(inc), std::move(agents), std::move(controllers)};
}

bool Network::all_static_controllers() const {
  for (const auto& c : controllers)
    if (c->dynamic()) return false;
  return true;
}

SteadyStateProblem::SteadyStateProblem(const Network& net, Eigen::VectorXd gains,
                                       Interval relation_domain, int relation_grid)
    : incidence_(net.incidence), gains_(std::move(gains)) {
  require(net.graph.connected(), "network.disconnected",
          "steady-state analysis needs a connected graph");
  require(gains_.size() == net.num_edges(), "network.invalid",
          "gain vector length does not match edge count");
  require((gains_.array() > 0.0).all(), "network.invalid",
          "edge gains must be positive");

  relations_.reserve(net.agents.size());
  for (const auto& agent : net.agents) {
    relations_.push_back(std::make_shared<MonotoneRelation>(
        relation_from_agent(*agent, relation_domain, relation_grid)));
  }
  controllers_.reserve(net.controllers.size());
  for (const auto& ctrl : net.controllers) {
    auto st = std::dynamic_pointer_cast<const StaticController>(ctrl);
    require(static_cast<bool>(st), "network.dynamic_controller",
            "steady-state oracle requires static edge controllers");
    controllers_.push_back(std::move(st));
  }
  all_flat_ = true;
  for (const auto& r : relations_)
    if (!r->identically_zero_inverse()) all_flat_ = false;
}

SteadyStateProblem SteadyStateProblem::with_gains(Eigen::VectorXd gains) const {
  SteadyStateProblem p(*this);
  require(gains.size() == gains_.size(), "network.invalid", "gain vector length changed");
  require((gains.array() > 0.0).all(), "network.invalid", "edge gains must be positive");
  p.gains_ = std::move(gains);
  return p;
}

Eigen::VectorXd SteadyStateProblem::inverse_relation(const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (int i = 0; i < y.size(); ++i) out(i) = relations_[i]->inverse(y(i));
  return out;
}

Eigen::VectorXd SteadyStateProblem::inverse_relation_derivative(
    const Eigen::VectorXd& y) const {
  Eigen::VectorXd out(y.size());
  for (int i = 0; i < y.size(); ++i) out(i) = relations_[i]->inverse_derivative(y(i));
  return out;
}

Eigen::VectorXd SteadyStateProblem::controller_map(const Eigen::VectorXd& zeta) const {
  Eigen::VectorXd out(zeta.size());
  for (int e = 0; e < zeta.size(); ++e) out(e) = controllers_[e]->map(zeta(e));
  return out;
}

Eigen::VectorXd SteadyStateProblem::controller_map_derivative(
    const Eigen::VectorXd& zeta) const {
  Eigen::VectorXd out(zeta.size());
  for (int e = 0; e < zeta.size(); ++e) out(e) = controllers_[e]->map_derivative(zeta(e));
  return out;
}

double SteadyStateProblem::agent_potential(const Eigen::VectorXd& y) const {
  double sum = 0.0;
  for (int i = 0; i < y.size(); ++i) sum += relations_[i]->conjugate_potential(y(i));
  return sum;
}

double SteadyStateProblem::controller_potential(const Eigen::VectorXd& zeta) const {
  double sum = 0.0;
  for (int e = 0; e < zeta.size(); ++e)
    sum += gains_(e) * controllers_[e]->potential(zeta(e));
  return sum;
}

double SteadyStateProblem::objective(const Eigen::VectorXd& y) const {
  return agent_potential(y) + controller_potential(incidence_.transpose() * y);
}

Eigen::VectorXd SteadyStateProblem::residual(const Eigen::VectorXd& y) const {
  Eigen::VectorXd zeta = incidence_.transpose() * y;
  Eigen::VectorXd amplified = gains_.cwiseProduct(controller_map(zeta));
  return inverse_relation(y) + incidence_ * amplified;
}

double SteadyStateProblem::agent_primal(int i, double u) const {
  const MonotoneRelation& rel = *relations_[i];
  // K(u) = u*y - K*(y) at the y where k^{-1}(y) = u
  double y = rel.forward(u);
  return u * y - rel.conjugate_potential(y);
}

double SteadyStateProblem::controller_conjugate(int e, double mu_raw) const {
  const StaticController& c = *controllers_[e];
  // Gamma*(mu) = mu*z - Gamma(z) at gamma(z) = mu; bracket by expansion
  double lo = c.root() - 1.0, hi = c.root() + 1.0;
  for (int k = 0; k < 200 && c.map(lo) > mu_raw; ++k) lo -= (hi - lo);
  for (int k = 0; k < 200 && c.map(hi) < mu_raw; ++k) hi += (hi - lo);
  require(c.map(lo) <= mu_raw && c.map(hi) >= mu_raw, "network.range",
          "controller conjugate outside reachable flow range");
  double z = monotone_bisect([&c, mu_raw](double t) { return c.map(t) - mu_raw; }, lo, hi);
  return mu_raw * z - c.potential(z);
}

namespace {

// Hessian of the steady-state objective; also the inner matrix of X(y).
Eigen::MatrixXd objective_hessian(const SteadyStateProblem& p, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd& E = p.incidence();
  Eigen::VectorXd zeta = E.transpose() * y;
  Eigen::VectorXd dgamma = p.gains().cwiseProduct(p.controller_map_derivative(zeta));
  Eigen::MatrixXd H = E * dgamma.asDiagonal() * E.transpose();
  H.diagonal() += p.inverse_relation_derivative(y);
  return H;
}

}  // namespace

SteadyStateSolution solve_network_steady_state(const SteadyStateProblem& p,
                                               const SolveOptions& opts) {
  const int n = p.num_agents();
  Eigen::VectorXd y = opts.initial_y.value_or(Eigen::VectorXd::Zero(n));
  require(y.size() == n, "network.invalid", "initial iterate has wrong length");
  const bool pin_mean = p.translation_invariant();
  if (pin_mean) y.array() -= y.mean();

  double phi = p.objective(y);
  Eigen::VectorXd g = p.residual(y);
  int it = 0;
  for (; it < opts.max_iterations; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < opts.tolerance) break;

    Eigen::MatrixXd H = objective_hessian(p, y);
    if (pin_mean) {
      // rank-one shift keeps the Newton step mean-free on the consensus kernel
      double c = std::max(1.0, H.trace() / n);
      H.array() += c / n;
    } else {
      H.diagonal().array() += 1e-14 * std::max(1.0, H.trace());
    }

    Eigen::VectorXd d = -Eigen::LDLT<Eigen::MatrixXd>(H).solve(g);
    if (!d.allFinite() || g.dot(d) >= 0.0) d = -g;  // gradient fallback

    double slope = g.dot(d);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd y_try = y + t * d;
      if (pin_mean) y_try.array() -= y_try.mean();
      double phi_try = p.objective(y_try);
      if (phi_try <= phi + 1e-4 * t * slope) {
        y = y_try;
        phi = phi_try;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // objective flat to rounding; accept if the residual already shrank
      Eigen::VectorXd y_try = y + 1e-8 * d;
      if (p.residual(y_try).lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>())
        y = y_try;
      else
        break;
    }
    g = p.residual(y);
  }

  double res = g.lpNorm<Eigen::Infinity>();
  require(res < opts.tolerance, "network.no_convergence",
          "steady-state solve stalled: residual " + std::to_string(res) + " after " +
              std::to_string(it) + " iterations (tolerance " +
              std::to_string(opts.tolerance) + ")");
  SteadyStateSolution sol;
  sol.y = y;
  sol.zeta = p.incidence().transpose() * y;
  sol.residual_inf = res;
  sol.iterations = it;
  sol.mean_pinned = pin_mean;
  return sol;
}

double opp_objective(const SteadyStateProblem& p, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& zeta) {
  double scale = std::max(1.0, y.lpNorm<Eigen::Infinity>());
  require((zeta - p.incidence().transpose() * y).lpNorm<Eigen::Infinity>() <=
              1e-9 * scale,
          "network.constraint", "zeta does not equal E^T y");
  return p.agent_potential(y) + p.controller_potential(zeta);
}

double ofp_objective(const SteadyStateProblem& p, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& mu) {
  double scale = std::max(1.0, mu.lpNorm<Eigen::Infinity>());
  require((u + p.incidence() * mu).lpNorm<Eigen::Infinity>() <= 1e-9 * scale,
          "network.constraint", "u does not equal -E mu");
  double sum = 0.0;
  for (int i = 0; i < u.size(); ++i) sum += p.agent_primal(i, u(i));
  for (int e = 0; e < mu.size(); ++e)
    sum += p.gains()(e) * p.controller_conjugate(e, mu(e) / p.gains()(e));
  return sum;
}

double duality_gap(const SteadyStateProblem& p, const Eigen::VectorXd& y,
                   const Eigen::VectorXd& zeta, const Eigen::VectorXd& u,
                   const Eigen::VectorXd& mu) {
  // Equals OPP + OFP once the wiring constraints hold: the pairing terms
  // u^T y + mu^T zeta cancel through u = -E mu, zeta = E^T y.
  return opp_objective(p, y, zeta) + ofp_objective(p, u, mu) -
         (u.dot(y) + mu.dot(zeta));
}

SensitivityMatrix sensitivity_matrix(const SteadyStateProblem& p,
                                     const Eigen::VectorXd& y) {
  Eigen::MatrixXd inner = objective_hessian(p, y);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(inner);
  double lo = eig.eigenvalues().minCoeff();
  double hi = eig.eigenvalues().maxCoeff();
  require(lo > 1e-12 * std::max(1.0, hi), "network.singular",
          "Theorem 4 positivity conditions violated: inner matrix has eigenvalue " +
              std::to_string(lo));
  SensitivityMatrix s;
  s.X = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
        eig.eigenvectors().transpose();
  s.min_eigenvalue = 1.0 / hi;
  return s;
}

Eigen::VectorXd formation_error_gradient(const SteadyStateProblem& p,
                                         const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& zeta_star) {
  const Eigen::MatrixXd& E = p.incidence();
  Eigen::VectorXd zeta = E.transpose() * y;
  Eigen::VectorXd gamma = p.controller_map(zeta);
  SensitivityMatrix s = sensitivity_matrix(p, y);
  return -2.0 * gamma.asDiagonal() * E.transpose() * (s.X * (E * (zeta - zeta_star)));
}

Eigen::VectorXd descent_direction(const SteadyStateProblem& p, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& zeta_star, double dead_zone) {
  Eigen::VectorXd zeta = p.incidence().transpose() * y;
  Eigen::VectorXd gamma = p.controller_map(zeta);
  Eigen::VectorXd v = Eigen::VectorXd::Zero(zeta.size());
  for (int e = 0; e < zeta.size(); ++e)
    if (std::abs(gamma(e)) > dead_zone) v(e) = (zeta(e) - zeta_star(e)) / gamma(e);
  return v;
}

}  // namespace formnet

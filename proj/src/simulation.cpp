#include "formnet/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "formnet/numeric.hpp"

namespace formnet {

namespace {

struct LoopState {
  Eigen::VectorXd x;
  Eigen::VectorXd eta;
};

struct LoopEval {
  Eigen::VectorXd xdot, etadot, u, y, zeta, mu;
};

LoopEval eval_loop(const Network& net, const Eigen::VectorXd& gains,
                   const LoopState& s) {
  const int n = net.num_agents();
  const int m = net.num_edges();
  LoopEval ev;
  ev.y.resize(n);
  for (int i = 0; i < n; ++i) ev.y(i) = net.agents[i]->output(s.x(i));
  ev.zeta = net.incidence.transpose() * ev.y;
  ev.mu.resize(m);
  ev.etadot.resize(s.eta.size());
  int eta_idx = 0;
  for (int e = 0; e < m; ++e) {
    const EdgeController& c = *net.controllers[e];
    if (c.dynamic()) {
      double eta_e = s.eta(eta_idx);
      ev.mu(e) = c.output(ev.zeta(e), eta_e);
      ev.etadot(eta_idx) = c.state_derivative(ev.zeta(e), eta_e);
      ++eta_idx;
    } else {
      ev.mu(e) = c.output(ev.zeta(e), 0.0);
    }
  }
  ev.u = -net.incidence * gains.cwiseProduct(ev.mu);
  ev.xdot.resize(n);
  for (int i = 0; i < n; ++i) ev.xdot(i) = net.agents[i]->derivative(s.x(i), ev.u(i));
  return ev;
}

int count_dynamic(const Network& net) {
  int k = 0;
  for (const auto& c : net.controllers)
    if (c->dynamic()) ++k;
  return k;
}

}  // namespace

Trajectory integrate_network(const Network& net, const Eigen::VectorXd& gains,
                             const Eigen::VectorXd& x0, const Eigen::VectorXd& eta0,
                             const SimOptions& opts) {
  require(opts.dt > 0.0, "simulation.invalid", "time step must be positive");
  require(opts.record_stride >= 1, "simulation.invalid", "record stride must be >= 1");
  require(x0.size() == net.num_agents(), "simulation.invalid",
          "initial state length does not match agent count");
  require(gains.size() == net.num_edges(), "simulation.invalid",
          "gain vector length does not match edge count");
  require((gains.array() > 0.0).all(), "simulation.invalid", "gains must be positive");
  const int dyn = count_dynamic(net);
  require(eta0.size() == dyn, "simulation.invalid",
          "controller state length does not match dynamic controller count");

  LoopState s{x0, eta0};
  Trajectory traj;
  auto record = [&](double t) {
    LoopEval ev = eval_loop(net, gains, s);
    traj.t.push_back(t);
    traj.x.push_back(s.x);
    traj.xdot.push_back(ev.xdot);
    traj.u.push_back(ev.u);
    traj.y.push_back(ev.y);
    traj.zeta.push_back(ev.zeta);
    traj.mu.push_back(ev.mu);
  };

  record(0.0);
  const long steps = static_cast<long>(std::ceil(opts.t_max / opts.dt - 1e-9));
  const double h = opts.dt;
  long since_check = 0;
  const long check_every =
      std::max<long>(1, static_cast<long>(opts.window / (opts.dt * opts.record_stride)));

  for (long step = 1; step <= steps; ++step) {
    LoopEval k1 = eval_loop(net, gains, s);
    LoopState s2{s.x + 0.5 * h * k1.xdot, s.eta + 0.5 * h * k1.etadot};
    LoopEval k2 = eval_loop(net, gains, s2);
    LoopState s3{s.x + 0.5 * h * k2.xdot, s.eta + 0.5 * h * k2.etadot};
    LoopEval k3 = eval_loop(net, gains, s3);
    LoopState s4{s.x + h * k3.xdot, s.eta + h * k3.etadot};
    LoopEval k4 = eval_loop(net, gains, s4);

    s.x += (h / 6.0) * (k1.xdot + 2.0 * k2.xdot + 2.0 * k3.xdot + k4.xdot);
    s.eta += (h / 6.0) * (k1.etadot + 2.0 * k2.etadot + 2.0 * k3.etadot + k4.etadot);

    if (!s.x.allFinite() || !s.eta.allFinite())
      throw Error("simulation.blow_up",
                  "non-finite state at t=" + std::to_string(step * h) +
                      " (time step too large for the gains?)");

    if (step % opts.record_stride == 0 || step == steps) {
      record(step * h);
      if (opts.stop_on_convergence && ++since_check >= check_every) {
        since_check = 0;
        if (traj.t.back() >= opts.window &&
            detect_convergence(traj, opts.window, opts.tolerance).converged)
          break;
      }
    }
  }
  return traj;
}

ConvergenceResult detect_convergence(const Trajectory& traj, double window, double tol) {
  ConvergenceResult res;
  if (traj.samples() < 2) return res;
  double t_end = traj.t.back();
  require(window > 0.0 && window < t_end, "simulation.invalid",
          "window must be shorter than the trajectory span");

  int first = traj.samples() - 1;
  while (first > 0 && traj.t[first - 1] >= t_end - window) --first;

  const int n = static_cast<int>(traj.y.front().size());
  Eigen::VectorXd lo = traj.y[first], hi = traj.y[first];
  Eigen::VectorXd y_sum = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd u_sum = Eigen::VectorXd::Zero(traj.u.front().size());
  int count = 0;
  for (int k = first; k < traj.samples(); ++k) {
    lo = lo.cwiseMin(traj.y[k]);
    hi = hi.cwiseMax(traj.y[k]);
    y_sum += traj.y[k];
    u_sum += traj.u[k];
    ++count;
  }
  double variation = (hi - lo).lpNorm<Eigen::Infinity>();
  double final_rate = traj.xdot.back().lpNorm<Eigen::Infinity>();
  if (variation < tol && final_rate < tol) {
    res.converged = true;
    res.y_ss = y_sum / count;
    res.u_ss = u_sum / count;
  }
  return res;
}

ExperimentRecord closed_loop_experiment(const Agent& agent, int agent_id, double beta,
                                        double y_ref, const ExperimentOptions& opts) {
  require(beta > 0.0, "simulation.invalid", "experiment gain must be positive");
  ExperimentRecord rec;
  rec.agent_id = agent_id;
  rec.beta = beta;
  rec.y_ref = y_ref;

  double x = opts.x0;
  auto deriv = [&](double xs) {
    double u = beta * (y_ref - agent.output(xs));
    return agent.derivative(xs, u);
  };

  const double h = opts.dt;
  const long steps = static_cast<long>(std::ceil(opts.t_max / h));
  // trailing window of outputs for the variation test
  const long win_samples = std::max<long>(2, static_cast<long>(opts.window / h));
  std::vector<double> ring(win_samples, agent.output(x));
  long filled = 1;

  for (long step = 1; step <= steps; ++step) {
    double k1 = deriv(x);
    double k2 = deriv(x + 0.5 * h * k1);
    double k3 = deriv(x + 0.5 * h * k2);
    double k4 = deriv(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(x))
      throw Error("simulation.blow_up",
                  "experiment diverged at t=" + std::to_string(step * h));

    double y = agent.output(x);
    ring[step % win_samples] = y;
    filled = std::min<long>(filled + 1, win_samples);
    rec.t_end = step * h;

    if (filled == win_samples && step % win_samples == 0) {
      auto [lo_it, hi_it] = std::minmax_element(ring.begin(), ring.end());
      double variation = *hi_it - *lo_it;
      if (variation < opts.tolerance && std::abs(deriv(x)) < opts.tolerance) {
        rec.converged = true;
        break;
      }
    }
  }

  double y_ss = agent.output(x);
  rec.y_ss = y_ss;
  rec.u_ss = beta * (y_ref - y_ss);
  return rec;
}

double stable_time_step(const Network& net, const Eigen::VectorXd& gains,
                        double dt_base) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian(net.incidence));
  double lap_max = eig.eigenvalues().maxCoeff();
  double gain_max = gains.maxCoeff();
  double slope_max = 1.0;
  for (int e = 0; e < net.num_edges(); ++e) {
    if (auto st = dynamic_cast<const StaticController*>(net.controllers[e].get())) {
      // sample the map slope around its root as a stiffness proxy
      double root = st->root();
      for (double d : {-1.0, 0.0, 1.0})
        slope_max = std::max(slope_max, st->map_derivative(root + d));
    }
  }
  // RK4 real-axis stability reaches |lambda| dt ~ 2.78; keep a margin and an
  // allowance of 50 for the agents' own rates.
  double bound = gain_max * lap_max * slope_max + 50.0;
  return std::min(dt_base, 2.0 / bound);
}

}  // namespace formnet

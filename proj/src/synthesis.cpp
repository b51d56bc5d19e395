#include "formnet/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "formnet/graph.hpp"

namespace formnet {

double estimate_mi_two_point(const SteadyStatePair& pair_star,
                             const SteadyStatePair& pair_zero, double zero_tol) {
  require(std::abs(pair_zero.u) < zero_tol, "synthesis.invalid",
          "second pair must have (near-)zero input, got u=" +
              std::to_string(pair_zero.u));
  return pair_star.u * (pair_star.y - pair_zero.y);
}

namespace {

double chain_bound_standard(const std::vector<SteadyStatePair>& sorted, double y_star) {
  const double u_tol = 1e-9;
  // base: last pair with nonpositive input (tightest lower bracket of y0)
  int base = -1;
  for (size_t k = 0; k < sorted.size(); ++k)
    if (sorted[k].u <= u_tol) base = static_cast<int>(k);
  require(base >= 0, "synthesis.inconsistent",
          "no pair with nonpositive input to bracket the zero-input output");

  // first pair at or beyond the target bounds u* from above
  int beyond = -1;
  for (size_t k = base + 1; k < sorted.size(); ++k) {
    if (sorted[k].y >= y_star) {
      beyond = static_cast<int>(k);
      break;
    }
  }
  require(beyond >= 0, "synthesis.inconsistent", "no measurement at or beyond the target output");

  double bound = 0.0;
  double prev_y = sorted[base].y;
  for (int k = base + 1; k < beyond; ++k) {
    bound += sorted[k].u * (sorted[k].y - prev_y);
    prev_y = sorted[k].y;
  }
  bound += sorted[beyond].u * (y_star - prev_y);
  return bound;
}

}  // namespace

double estimate_mi_chain(std::vector<SteadyStatePair> pairs, double y_star) {
  require(pairs.size() >= 2, "synthesis.invalid", "chain estimate needs at least 2 pairs");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const SteadyStatePair& a, const SteadyStatePair& b) {
                     return a.y < b.y;
                   });
  double u_scale = 1.0;
  for (const auto& p : pairs) u_scale = std::max(u_scale, std::abs(p.u));
  for (size_t k = 1; k < pairs.size(); ++k)
    require(pairs[k].u >= pairs[k - 1].u - 1e-6 * u_scale, "synthesis.inconsistent",
            "inconsistent measurements: inputs not monotone in outputs");

  bool standard_ok = false, mirror_ok = false;
  for (const auto& p : pairs) {
    if (p.u <= 1e-9) standard_ok = true;
    if (p.u >= -1e-9) mirror_ok = true;
  }
  standard_ok = standard_ok && pairs.back().y >= y_star;
  mirror_ok = mirror_ok && pairs.front().y <= y_star;

  if (standard_ok) return chain_bound_standard(pairs, y_star);
  require(mirror_ok, "synthesis.inconsistent",
          "measurements do not bracket the target on either side");
  // target left of the zero-input output: mirror the relation
  std::vector<SteadyStatePair> mirrored(pairs.rbegin(), pairs.rend());
  for (auto& p : mirrored) {
    p.u = -p.u;
    p.y = -p.y;
  }
  return chain_bound_standard(mirrored, -y_star);
}

MiEstimate algorithm1_bound_from_pairs(const SteadyStatePair& plus,
                                       const SteadyStatePair& minus,
                                       const SteadyStatePair& third, double y_star) {
  std::vector<double> us = {plus.u, minus.u, third.u};
  std::vector<double> ys = {plus.y, minus.y, third.y};
  std::stable_sort(us.begin(), us.end());
  std::stable_sort(ys.begin(), ys.end());

  MiEstimate est;
  if (us[1] > 0.0) {
    est.bracket.y0_lo = ys[0];
    est.bracket.y0_hi = ys[1];
  } else {
    est.bracket.y0_lo = ys[1];
    est.bracket.y0_hi = ys[2];
  }
  if (ys[1] > y_star) {
    est.bracket.ustar_lo = us[0];
    est.bracket.ustar_hi = us[1];
  } else {
    est.bracket.ustar_lo = us[1];
    est.bracket.ustar_hi = us[2];
  }
  require(est.bracket.y0_lo <= est.bracket.y0_hi &&
              est.bracket.ustar_lo <= est.bracket.ustar_hi,
          "synthesis.inconsistent", "measurements inconsistent: inverted bracket");

  est.m_hat = -std::numeric_limits<double>::infinity();
  for (double omega : {est.bracket.ustar_lo, est.bracket.ustar_hi})
    for (double upsilon : {est.bracket.y0_lo, est.bracket.y0_hi})
      est.m_hat = std::max(est.m_hat, omega * (y_star - upsilon));
  return est;
}

namespace {

SteadyStatePair to_pair(const ExperimentRecord& rec) { return {rec.u_ss, rec.y_ss}; }

ExperimentRecord run_experiment_or_throw(const Agent& agent, int agent_id, double beta,
                                         double y_ref, const ExperimentOptions& opts) {
  ExperimentRecord rec = closed_loop_experiment(agent, agent_id, beta, y_ref, opts);
  require(rec.converged, "synthesis.experiment_failed",
          "experiment did not converge within t_max=" + std::to_string(opts.t_max) +
              " (agent " + std::to_string(agent_id) + ", beta=" + std::to_string(beta) +
              ", y_ref=" + std::to_string(y_ref) + ")");
  return rec;
}

}  // namespace

MiEstimate algorithm1_estimate_mi(const Agent& agent, int agent_id, double y_star,
                                  const Algorithm1Options& opts) {
  require(opts.beta_small > 0.0, "synthesis.invalid", "beta_small must be positive");
  const double ref = 1.0 / opts.beta_small;
  ExperimentRecord plus =
      run_experiment_or_throw(agent, agent_id, opts.beta_small, ref, opts.experiment);
  ExperimentRecord minus =
      run_experiment_or_throw(agent, agent_id, opts.beta_small, -ref, opts.experiment);

  double offset = opts.third_offset_factor * std::max(1.0, std::abs(y_star));
  double third_ref = (plus.y_ss < y_star) ? y_star + offset : y_star - offset;
  ExperimentRecord third =
      run_experiment_or_throw(agent, agent_id, opts.beta_third, third_ref, opts.experiment);

  MiEstimate est =
      algorithm1_bound_from_pairs(to_pair(plus), to_pair(minus), to_pair(third), y_star);
  est.experiments = {plus, minus, third};
  return est;
}

double estimate_mi_lti(const SteadyStatePair& pair, double y_star) {
  const double tol = 1e-12;
  if (std::abs(pair.y) < tol) {
    require(std::abs(pair.u) < tol, "synthesis.invalid",
            "pair violates the LTI hypothesis: nonzero input at zero output");
    return 0.0;  // degenerate (0,0) pair carries no slope information
  }
  require(std::abs(pair.u) >= tol, "synthesis.invalid",
          "pair violates the LTI hypothesis: zero input at nonzero output");
  double slope = pair.u / pair.y;
  require(slope > 0.0, "synthesis.invalid", "pair implies a nonpositive slope");
  return y_star * y_star * pair.u / (2.0 * pair.y);
}

double compute_M(const std::vector<const StaticController*>& controllers,
                 const Eigen::VectorXd& zeta_star, double epsilon,
                 const Eigen::MatrixXd& incidence, MMode mode, std::uint64_t seed) {
  const int m = static_cast<int>(controllers.size());
  require(m >= 1, "synthesis.invalid", "M needs at least one edge");
  require(m == incidence.cols() && m == zeta_star.size(), "synthesis.invalid",
          "controller, incidence and zeta_star sizes disagree");
  require(epsilon > 0.0, "synthesis.invalid", "epsilon must be positive");
  require(edge_space_residual(incidence, zeta_star) <= 1e-8,
          "synthesis.invalid", "zeta_star is not realizable (outside Im(E^T))");

  if (mode == MMode::per_edge) return m * epsilon * epsilon;

  Eigen::MatrixXd B = edge_space_basis(incidence);
  const int r = static_cast<int>(B.cols());
  require(r >= 1, "synthesis.invalid", "edge space is trivial");

  auto gamma_sum = [&](const Eigen::VectorXd& zeta) {
    double s = 0.0;
    for (int e = 0; e < m; ++e) s += controllers[e]->potential(zeta(e));
    return s;
  };
  auto value = [&](const Eigen::VectorXd& s) {
    return gamma_sum(zeta_star + epsilon * (B * s));
  };
  auto gradient = [&](const Eigen::VectorXd& s) {
    Eigen::VectorXd zeta = zeta_star + epsilon * (B * s);
    Eigen::VectorXd g(m);
    for (int e = 0; e < m; ++e) g(e) = controllers[e]->map(zeta(e));
    return Eigen::VectorXd(epsilon * (B.transpose() * g));
  };

  // minimize over the unit sphere: multistart projected gradient descent
  std::vector<Eigen::VectorXd> starts;
  for (int i = 0; i < r; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(r);
    e(i) = 1.0;
    starts.push_back(e);
    starts.push_back(-e);
  }
  Rng rng(seed ^ 0x4d6f64654dULL);
  for (int k = 0; k < 16; ++k) {
    Eigen::VectorXd s(r);
    for (int i = 0; i < r; ++i) s(i) = rng.uniform(-1.0, 1.0);
    if (s.norm() < 1e-12) s(0) = 1.0;
    starts.push_back(s.normalized());
  }

  double best = std::numeric_limits<double>::infinity();
  for (Eigen::VectorXd s : starts) {
    double f = value(s);
    double step = 1.0;
    for (int it = 0; it < 300; ++it) {
      Eigen::VectorXd g = gradient(s);
      Eigen::VectorXd tangent = g - g.dot(s) * s;
      if (tangent.norm() < 1e-12 * std::max(1.0, std::abs(f))) break;
      bool moved = false;
      for (int ls = 0; ls < 40; ++ls) {
        Eigen::VectorXd trial = (s - step * tangent).normalized();
        double ft = value(trial);
        if (ft < f - 1e-12) {
          s = trial;
          f = ft;
          moved = true;
          step *= 1.3;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    best = std::min(best, f);
  }
  return best;
}

namespace {

// Chain-method measurement plan: the three bracketing experiments, then
// refinement runs at beta_refine. The first refinements push a sample past
// y_star when the initial three never straddle it; the rest sweep references
// over the bracket hull.
std::pair<MiEstimate, std::vector<ExperimentRecord>> chain_estimate_for_agent(
    const Agent& agent, int agent_id, double y_star, const SynthesisOptions& opts,
    Rng& rng) {
  MiEstimate base = algorithm1_estimate_mi(agent, agent_id, y_star, opts.algorithm1);
  std::vector<ExperimentRecord> records = base.experiments;
  int budget = std::max(0, opts.measurements_per_agent - 3);

  std::vector<SteadyStatePair> pairs;
  for (const auto& r : records) pairs.push_back(to_pair(r));

  auto has_coverage = [&]() {
    double y_min = pairs.front().y, y_max = pairs.front().y;
    for (const auto& p : pairs) {
      y_min = std::min(y_min, p.y);
      y_max = std::max(y_max, p.y);
    }
    bool mirror = y_star < 0.5 * (base.bracket.y0_lo + base.bracket.y0_hi);
    return mirror ? (y_min <= y_star) : (y_max >= y_star);
  };

  const double beta = opts.beta_refine;
  ExperimentOptions exp_opts = opts.algorithm1.experiment;
  bool mirror = y_star < 0.5 * (base.bracket.y0_lo + base.bracket.y0_hi);

  double push = std::max(1.0, std::abs(y_star));
  while (budget > 0 && !has_coverage()) {
    double ref = mirror ? y_star - push : y_star + push;
    ExperimentRecord rec = run_experiment_or_throw(agent, agent_id, beta, ref, exp_opts);
    records.push_back(rec);
    pairs.push_back(to_pair(rec));
    --budget;
    push *= 2.0;
  }

  double hull_lo = std::min(base.bracket.y0_lo, y_star);
  double hull_hi = std::max(base.bracket.y0_hi, y_star);
  while (budget > 0) {
    double ref = rng.uniform(hull_lo, hull_hi);
    ExperimentRecord rec = run_experiment_or_throw(agent, agent_id, beta, ref, exp_opts);
    records.push_back(rec);
    pairs.push_back(to_pair(rec));
    --budget;
  }

  MiEstimate est;
  est.bracket = base.bracket;
  est.experiments = records;
  if (has_coverage()) {
    est.m_hat = estimate_mi_chain(pairs, y_star);
    // the chain refines the three-experiment rectangle; keep the tighter one
    est.m_hat = std::min(est.m_hat, base.m_hat);
  } else {
    est.m_hat = base.m_hat;  // refinement budget too small to reach the target
  }
  return {est, records};
}

}  // namespace

EstimateReport algorithm2_uniform_gain(const Network& net,
                                       const Eigen::VectorXd& zeta_star, double epsilon,
                                       const SynthesisOptions& opts,
                                       std::optional<Eigen::VectorXd> y_star_override) {
  const int n = net.num_agents();
  require(zeta_star.size() == net.num_edges(), "synthesis.invalid",
          "zeta_star length does not match edge count");
  require(edge_space_residual(net.incidence, zeta_star) <= 1e-8, "synthesis.invalid",
          "zeta_star is not realizable (outside Im(E^T))");

  Eigen::VectorXd y_star;
  if (y_star_override) {
    y_star = *y_star_override;
    require(y_star.size() == n, "synthesis.invalid", "y_star override has wrong length");
    require((net.incidence.transpose() * y_star - zeta_star).lpNorm<Eigen::Infinity>() <=
                1e-8,
            "synthesis.invalid", "y_star override does not realize zeta_star");
  } else {
    y_star = minimum_norm_node_vector(net.incidence, zeta_star);
  }

  EstimateReport report;
  report.y_star = y_star;
  Rng rng(opts.seed ^ 0x524546494e45ULL);

  for (int i = 0; i < n; ++i) {
    const Agent& agent = *net.agents[i];
    AgentEstimate ae;
    ae.agent_id = i;
    switch (opts.method) {
      case MiMethod::three_experiments: {
        MiEstimate est = algorithm1_estimate_mi(agent, i, y_star(i), opts.algorithm1);
        ae.m_hat = est.m_hat;
        ae.bracket = est.bracket;
        ae.measurements = static_cast<int>(est.experiments.size());
        report.experiments.insert(report.experiments.end(), est.experiments.begin(),
                                  est.experiments.end());
        break;
      }
      case MiMethod::chain: {
        auto [est, records] = chain_estimate_for_agent(agent, i, y_star(i), opts, rng);
        ae.m_hat = est.m_hat;
        ae.bracket = est.bracket;
        ae.measurements = static_cast<int>(records.size());
        report.experiments.insert(report.experiments.end(), records.begin(),
                                  records.end());
        break;
      }
      case MiMethod::lti_exact: {
        require(agent.is_lti(), "synthesis.invalid",
                "lti_exact method on a non-LTI agent " + std::to_string(i));
        double ref = std::max(1.0, std::abs(y_star(i)) * 2.0);
        ExperimentRecord rec =
            run_experiment_or_throw(agent, i, 1.0, ref, opts.algorithm1.experiment);
        ae.m_hat = estimate_mi_lti(to_pair(rec), y_star(i));
        ae.measurements = 1;
        report.experiments.push_back(rec);
        break;
      }
      case MiMethod::oracle_true: {
        MonotoneRelation rel = relation_from_agent(agent);
        ae.m_hat = rel.conjugate_potential(y_star(i));
        ae.measurements = 0;
        break;
      }
    }
    report.m_hat += ae.m_hat;
    report.per_agent.push_back(ae);
  }

  std::vector<const StaticController*> static_ctrls;
  for (const auto& c : net.controllers) {
    auto* st = dynamic_cast<const StaticController*>(c.get());
    require(st != nullptr, "synthesis.invalid",
            "uniform-gain synthesis needs static controllers");
    static_ctrls.push_back(st);
  }
  report.M_euclidean = compute_M(static_ctrls, zeta_star, epsilon, net.incidence,
                                 MMode::euclidean, opts.seed);
  report.M_per_edge =
      compute_M(static_ctrls, zeta_star, epsilon, net.incidence, MMode::per_edge);
  report.mode = opts.m_mode;
  double M = (opts.m_mode == MMode::euclidean) ? report.M_euclidean : report.M_per_edge;
  report.alpha = report.m_hat / M;
  return report;
}

namespace {

class SteadyStateEvaluator {
 public:
  SteadyStateEvaluator(const Network& net, SteadyStateMode mode, const SimOptions& sim,
                       double solver_tol)
      : net_(net), mode_(mode), sim_(sim), solver_tol_(solver_tol) {
    if (mode_ == SteadyStateMode::oracle)
      problem_.emplace(net, Eigen::VectorXd::Ones(net.num_edges()));
    else
      x_ = Eigen::VectorXd::Zero(net.num_agents());
  }

  // steady-state zeta for the given gains; warm-starts from the previous call
  Eigen::VectorXd zeta(const Eigen::VectorXd& gains) {
    if (mode_ == SteadyStateMode::oracle) {
      SolveOptions so;
      so.tolerance = solver_tol_;
      so.initial_y = last_y_;
      SteadyStateSolution sol = solve_network_steady_state(problem_->with_gains(gains), so);
      last_y_ = sol.y;
      return sol.zeta;
    }
    SimOptions sim = sim_;
    sim.dt = stable_time_step(net_, gains, sim_.dt);
    sim.stop_on_convergence = true;
    Trajectory traj =
        integrate_network(net_, gains, x_, Eigen::VectorXd::Zero(0), sim);
    ConvergenceResult conv = detect_convergence(traj, sim.window, sim.tolerance);
    require(conv.converged, "synthesis.no_convergence",
            "closed loop did not settle within t_max=" + std::to_string(sim.t_max));
    x_ = traj.x.back();
    return net_.incidence.transpose() * conv.y_ss;
  }

 private:
  const Network& net_;
  SteadyStateMode mode_;
  SimOptions sim_;
  double solver_tol_;
  std::optional<SteadyStateProblem> problem_;
  std::optional<Eigen::VectorXd> last_y_;
  Eigen::VectorXd x_;
};

}  // namespace

IterateResult algorithm3_iterate(const Network& net, const Eigen::VectorXd& zeta_star,
                                 double epsilon, const Eigen::VectorXd& a0,
                                 const IterateOptions& opts) {
  require(opts.h > 0.0, "synthesis.invalid", "step size must be positive");
  require(epsilon > 0.0, "synthesis.invalid", "epsilon must be positive");
  require((a0.array() > 0.0).all(), "synthesis.invalid", "initial gains must be positive");

  std::vector<const StaticController*> ctrls;
  for (const auto& c : net.controllers) {
    auto* st = dynamic_cast<const StaticController*>(c.get());
    require(st != nullptr, "synthesis.invalid",
            "iterative tuning needs static controllers");
    ctrls.push_back(st);
  }

  SteadyStateEvaluator eval(net, opts.mode, opts.sim, opts.solver_tolerance);
  IterateResult result;
  result.gains = a0;

  for (int j = 0; j <= opts.max_iterations; ++j) {
    Eigen::VectorXd zeta = eval.zeta(result.gains);
    double eps_j = (zeta - zeta_star).norm();

    Eigen::VectorXd v = Eigen::VectorXd::Zero(net.num_edges());
    for (int e = 0; e < net.num_edges(); ++e) {
      double g = ctrls[e]->map(zeta(e));
      if (std::abs(g) > 1e-12) v(e) = (zeta(e) - zeta_star(e)) / g;
    }

    IterationRow row;
    row.j = j;
    row.gains = result.gains;
    row.gain_norm = result.gains.norm();
    row.F = eps_j * eps_j;
    row.eps = eps_j;
    row.v = v;
    result.log.rows.push_back(std::move(row));

    if (eps_j <= epsilon) {
      result.log.halted = true;
      break;
    }
    if (j == opts.max_iterations) break;

    Eigen::VectorXd next = result.gains + opts.h * v;
    require((next.array() > 0.0).all(), "synthesis.step_too_large",
            "step size too large: a gain was driven nonpositive at iteration " +
                std::to_string(j));
    result.gains = next;
  }
  return result;
}

RampResult slow_ramp(const Network& net, const Eigen::VectorXd& zeta_star,
                     double epsilon, const std::vector<double>& schedule,
                     SteadyStateMode mode, const SimOptions& sim) {
  require(!schedule.empty(), "synthesis.invalid", "empty ramp schedule");
  for (size_t k = 0; k < schedule.size(); ++k) {
    require(schedule[k] > 0.0, "synthesis.invalid", "ramp gains must be positive");
    require(k == 0 || schedule[k] > schedule[k - 1], "synthesis.invalid",
            "ramp schedule must increase");
  }

  SteadyStateEvaluator eval(net, mode, sim, 1e-10);
  RampResult result;
  for (double alpha : schedule) {
    Eigen::VectorXd gains = Eigen::VectorXd::Constant(net.num_edges(), alpha);
    double dist;
    try {
      dist = (eval.zeta(gains) - zeta_star).norm();
    } catch (const Error& e) {
      if (std::string(e.kind()) != "synthesis.no_convergence") throw;
      dist = std::numeric_limits<double>::infinity();  // goal not certified
    }
    result.attempts.emplace_back(alpha, dist);
    if (dist <= epsilon) {
      result.alpha = alpha;
      return result;
    }
  }
  throw Error("synthesis.schedule_exhausted",
              "ramp schedule exhausted; last distance " +
                  std::to_string(result.attempts.back().second));
}

}  // namespace formnet

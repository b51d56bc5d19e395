#include "formnet/commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "formnet/csv.hpp"

namespace formnet {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Scenario load_with_overrides(const std::string& path, const RunOverrides& ov) {
  std::ifstream in(path);
  require(in.good(), "scenario.io", "cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  json root;
  try {
    root = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw Error("scenario.schema", path + ": " + std::string(e.what()));
  }
  if (ov.seed) root["seed"] = *ov.seed;
  if (ov.m_mode) root["synthesis"]["m_mode"] = *ov.m_mode;
  if (ov.steady_state) root["synthesis"]["steady_state"] = *ov.steady_state;
  if (ov.dt) root["sim"]["dt"] = *ov.dt;
  if (ov.t_max) root["sim"]["t_max"] = *ov.t_max;
  if (ov.h) root["synthesis"]["h"] = *ov.h;
  if (ov.max_iter) root["synthesis"]["max_iter"] = *ov.max_iter;
  return parse_scenario_text(root.dump(), path);
}

struct OutputContext {
  fs::path dir;
  std::string provenance;
};

OutputContext prepare_output(const Scenario& sc, const std::string& out_dir) {
  OutputContext ctx;
  ctx.dir = out_dir;
  fs::create_directories(ctx.dir);
  ctx.provenance = provenance_line(sc.name, sc.seed, sc.config_hash);
  std::ofstream eff(ctx.dir / "effective_config.json");
  require(eff.good(), "csv.io", "cannot write effective_config.json");
  eff << sc.effective_json << "\n";
  return ctx;
}

std::vector<std::string> trajectory_columns(int n, int m) {
  std::vector<std::string> cols = {"t"};
  for (int i = 0; i < n; ++i) cols.push_back("x" + std::to_string(i));
  for (int i = 0; i < n; ++i) cols.push_back("y" + std::to_string(i));
  for (int e = 0; e < m; ++e) cols.push_back("zeta" + std::to_string(e));
  return cols;
}

void write_trajectory(const OutputContext& ctx, const Trajectory& traj, int n, int m) {
  CsvWriter csv((ctx.dir / "trajectory.csv").string(), ctx.provenance,
                trajectory_columns(n, m));
  std::vector<double> row(1 + 2 * n + m);
  for (int k = 0; k < traj.samples(); ++k) {
    int c = 0;
    row[c++] = traj.t[k];
    for (int i = 0; i < n; ++i) row[c++] = traj.x[k](i);
    for (int i = 0; i < n; ++i) row[c++] = traj.y[k](i);
    for (int e = 0; e < m; ++e) row[c++] = traj.zeta[k](e);
    csv.row(row);
  }
}

void write_experiments(const OutputContext& ctx,
                       const std::vector<ExperimentRecord>& records) {
  CsvWriter csv((ctx.dir / "experiments.csv").string(), ctx.provenance,
                {"agent", "beta", "y_ref", "u_ss", "y_ss"});
  for (const auto& r : records)
    csv.row(std::vector<double>{static_cast<double>(r.agent_id), r.beta, r.y_ref,
                                r.u_ss, r.y_ss});
}

void write_estimates(const OutputContext& ctx, const EstimateReport& report) {
  CsvWriter csv((ctx.dir / "estimate.csv").string(), ctx.provenance,
                {"agent", "m_hat", "y0_lo", "y0_hi", "ustar_lo", "ustar_hi"});
  for (const auto& a : report.per_agent)
    csv.row(std::vector<double>{static_cast<double>(a.agent_id), a.m_hat,
                                a.bracket.y0_lo, a.bracket.y0_hi, a.bracket.ustar_lo,
                                a.bracket.ustar_hi});
}

void write_synthesis(const OutputContext& ctx, const EstimateReport& report) {
  CsvWriter csv((ctx.dir / "synthesis.csv").string(), ctx.provenance,
                {"m_hat", "M", "alpha", "mode"});
  csv.row(std::vector<std::string>{CsvWriter::format(report.m_hat),
                                   CsvWriter::format(report.M_euclidean),
                                   CsvWriter::format(report.m_hat / report.M_euclidean),
                                   "euclidean"});
  csv.row(std::vector<std::string>{CsvWriter::format(report.m_hat),
                                   CsvWriter::format(report.M_per_edge),
                                   CsvWriter::format(report.m_hat / report.M_per_edge),
                                   "per_edge"});
}

void write_iterations(const OutputContext& ctx, const IterationLog& log, int m) {
  CsvWriter csv((ctx.dir / "iterations.csv").string(), ctx.provenance,
                {"j", "a_norm", "F", "eps"});
  for (const auto& r : log.rows)
    csv.row(std::vector<double>{static_cast<double>(r.j), r.gain_norm, r.F, r.eps});

  std::vector<std::string> cols = {"j"};
  for (int e = 0; e < m; ++e) cols.push_back("a" + std::to_string(e));
  CsvWriter gains_csv((ctx.dir / "gains.csv").string(), ctx.provenance, cols);
  for (const auto& r : log.rows) {
    std::vector<double> row = {static_cast<double>(r.j)};
    for (int e = 0; e < m; ++e) row.push_back(r.gains(e));
    gains_csv.row(row);
  }
}

Trajectory run_network_sim(const Scenario& sc, const Network& net,
                           const Eigen::VectorXd& gains, bool stop_on_convergence) {
  SimOptions opts = sc.sim;
  opts.stop_on_convergence = stop_on_convergence;
  Eigen::VectorXd x0 = sc.initial_state(net);
  int dyn = 0;
  for (const auto& c : net.controllers)
    if (c->dynamic()) ++dyn;
  return integrate_network(net, gains, x0, Eigen::VectorXd::Zero(dyn), opts);
}

int cmd_simulate(const Scenario& sc, const OutputContext& ctx) {
  Network net = sc.build_network();
  Trajectory traj = run_network_sim(sc, net, sc.gains, true);
  write_trajectory(ctx, traj, net.num_agents(), net.num_edges());
  ConvergenceResult conv = detect_convergence(traj, sc.sim.window, sc.sim.tolerance);
  if (!conv.converged) {
    std::cout << "simulate: no steady state within t_max=" << sc.sim.t_max << "\n";
    return 1;
  }
  double dist = (net.incidence.transpose() * conv.y_ss - sc.zeta_star).norm();
  std::cout << "simulate: converged, ||zeta_ss - zeta_star|| = " << dist
            << (dist <= sc.epsilon ? " <= " : " > ") << sc.epsilon << "\n";
  return dist <= sc.epsilon ? 0 : 1;
}

Eigen::VectorXd resolve_y_star(const Scenario& sc, const Network& net) {
  if (sc.y_star) return *sc.y_star;
  return minimum_norm_node_vector(net.incidence, sc.zeta_star);
}

int cmd_experiment(const Scenario& sc, const OutputContext& ctx) {
  Network net = sc.build_network();
  Eigen::VectorXd y_star = resolve_y_star(sc, net);
  std::vector<ExperimentRecord> records;
  for (int i = 0; i < net.num_agents(); ++i) {
    MiEstimate est =
        algorithm1_estimate_mi(*net.agents[i], i, y_star(i), sc.algorithm1_options());
    records.insert(records.end(), est.experiments.begin(), est.experiments.end());
  }
  write_experiments(ctx, records);
  return 0;
}

int cmd_estimate(const Scenario& sc, const OutputContext& ctx, bool with_synthesis) {
  Network net = sc.build_network();
  EstimateReport report = algorithm2_uniform_gain(net, sc.zeta_star, sc.epsilon,
                                                  sc.synthesis_options(),
                                                  sc.y_star ? std::optional(*sc.y_star)
                                                            : std::nullopt);
  write_experiments(ctx, report.experiments);
  write_estimates(ctx, report);
  if (with_synthesis) {
    write_synthesis(ctx, report);
    std::cout << "synthesize: m_hat=" << report.m_hat << " alpha(" << to_string(report.mode)
              << ")=" << report.alpha << "\n";
  }
  return 0;
}

int cmd_iterate(const Scenario& sc, const OutputContext& ctx) {
  Network net = sc.build_network();
  IterateOptions opts;
  opts.h = sc.h_step;
  opts.max_iterations = sc.max_iterations;
  opts.mode = sc.steady_state;
  opts.sim = sc.sim;
  IterateResult res = algorithm3_iterate(net, sc.zeta_star, sc.epsilon, sc.a0, opts);
  write_iterations(ctx, res.log, net.num_edges());
  const IterationRow& last = res.log.rows.back();
  std::cout << "iterate: " << (res.log.halted ? "halted" : "iteration cap reached")
            << " at j=" << last.j << " with eps=" << last.eps
            << " ||a||=" << last.gain_norm << "\n";
  return res.log.halted ? 0 : 1;
}

int cmd_ramp(const Scenario& sc, const OutputContext& ctx) {
  Network net = sc.build_network();
  std::vector<std::pair<double, double>> attempts;
  int code = 0;
  double alpha = 0.0;
  try {
    RampResult res = slow_ramp(net, sc.zeta_star, sc.epsilon, sc.ramp_schedule,
                               sc.steady_state, sc.sim);
    attempts = res.attempts;
    alpha = res.alpha;
  } catch (const Error& e) {
    if (std::string(e.kind()) != "synthesis.schedule_exhausted") throw;
    code = 1;
    std::cout << "ramp: " << e.what() << "\n";
  }
  CsvWriter csv((ctx.dir / "ramp.csv").string(), ctx.provenance,
                {"alpha", "distance", "passed"});
  for (const auto& [a, d] : attempts)
    csv.row(std::vector<double>{a, d, (d <= sc.epsilon) ? 1.0 : 0.0});
  if (code == 0) std::cout << "ramp: goal met at alpha=" << alpha << "\n";
  return code;
}

int cmd_case_study(const Scenario& sc, const OutputContext& ctx) {
  Network net = sc.build_network();
  EstimateReport report = algorithm2_uniform_gain(net, sc.zeta_star, sc.epsilon,
                                                  sc.synthesis_options(),
                                                  sc.y_star ? std::optional(*sc.y_star)
                                                            : std::nullopt);
  write_experiments(ctx, report.experiments);
  write_estimates(ctx, report);
  write_synthesis(ctx, report);
  std::cout << "case-study: m_hat=" << report.m_hat
            << " M_euclidean=" << report.M_euclidean
            << " M_per_edge=" << report.M_per_edge << " alpha(" << to_string(report.mode)
            << ")=" << report.alpha << "\n";

  Eigen::VectorXd gains = Eigen::VectorXd::Constant(net.num_edges(), report.alpha);
  Scenario run = sc;
  run.sim.dt = stable_time_step(net, gains, sc.sim.dt);
  Trajectory traj = run_network_sim(run, net, gains, true);
  write_trajectory(ctx, traj, net.num_agents(), net.num_edges());
  ConvergenceResult conv = detect_convergence(traj, run.sim.window, run.sim.tolerance);
  require(conv.converged, "synthesis.no_convergence",
          "closed loop with the synthesized gain did not settle within t_max");
  double dist = (net.incidence.transpose() * conv.y_ss - sc.zeta_star).norm();
  std::cout << "case-study: closed-loop ||zeta_ss - zeta_star|| = " << dist
            << (dist <= sc.epsilon ? " <= " : " > ") << sc.epsilon << "\n";
  return dist <= sc.epsilon ? 0 : 1;
}

struct CheckList {
  bool all_ok = true;
  void check(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << ": " << detail << "\n";
    all_ok = all_ok && ok;
  }
};

int cmd_verify(const Scenario& sc, const OutputContext&) {
  Network net = sc.build_network();
  CheckList checks;
  const Eigen::MatrixXd& E = net.incidence;
  const int n = net.num_agents();

  double zres = edge_space_residual(E, sc.zeta_star);
  checks.check("zeta_star realizable", zres <= 1e-8,
               "distance from Im(E^T) = " + CsvWriter::format(zres));

  {
    Rng rng(sc.seed ^ 0x5645ULL);
    Eigen::VectorXd z(net.num_edges());
    for (int e = 0; e < net.num_edges(); ++e) z(e) = rng.uniform(-1.0, 1.0);
    Eigen::VectorXd p1 = project_edge_space(E, z);
    double drift = (project_edge_space(E, p1) - p1).norm();
    checks.check("projector idempotent", drift <= 1e-10,
                 "||P(Pz) - Pz|| = " + CsvWriter::format(drift));
  }

  for (int i = 0; i < n; ++i) {
    if (auto* ca = dynamic_cast<const ControlAffineAgent*>(net.agents[i].get())) {
      MeipVerdict verdict = check_meip_control_affine(*ca, sc.meip);
      checks.check("meip agent " + std::to_string(i), verdict.passed,
                   verdict.passed ? "certified on sampled domain" : verdict.reason);
    }
  }

  if (net.all_static_controllers()) {
    SteadyStateProblem problem(net, sc.gains, sc.meip.domain, sc.meip.grid);
    SteadyStateSolution sol = solve_network_steady_state(problem);
    checks.check("oracle residual", sol.residual_inf < 1e-8,
                 CsvWriter::format(sol.residual_inf));

    Trajectory traj = run_network_sim(sc, net, sc.gains, true);
    ConvergenceResult conv = detect_convergence(traj, sc.sim.window, sc.sim.tolerance);
    if (!conv.converged) {
      checks.check("simulation converged", false,
                   "no steady state within t_max=" + CsvWriter::format(sc.sim.t_max));
    } else {
      Eigen::VectorXd y_sim = conv.y_ss.array() - conv.y_ss.mean();
      Eigen::VectorXd y_orc = sol.y.array() - sol.y.mean();
      double gap = (y_sim - y_orc).lpNorm<Eigen::Infinity>();
      checks.check("oracle matches simulation", gap <= 1e-3,
                   "mean-pinned gap = " + CsvWriter::format(gap));
    }

    Eigen::VectorXd mu = problem.gains().cwiseProduct(problem.controller_map(sol.zeta));
    Eigen::VectorXd u = -E * mu;
    double gap = duality_gap(problem, sol.y, sol.zeta, u, mu);
    checks.check("duality gap", std::abs(gap) <= 1e-6, CsvWriter::format(gap));

    double worst_fenchel = 0.0;
    for (int i = 0; i < n; ++i) {
      const MonotoneRelation& rel = problem.relation(i);
      if (rel.identically_zero_inverse()) continue;
      Interval dom = rel.domain();
      for (int k = 1; k <= 7; ++k) {
        double y = dom.lo + dom.width() * k / 8.0;
        double uy = rel.inverse(y);
        double res = std::abs(problem.agent_primal(i, uy) + rel.conjugate_potential(y) -
                              uy * y);
        worst_fenchel = std::max(worst_fenchel, res);
      }
    }
    checks.check("fenchel identity", worst_fenchel < 1e-5,
                 "max residual = " + CsvWriter::format(worst_fenchel));
  } else {
    std::cout << "[skip] oracle checks (dynamic edge controllers)\n";
  }

  {
    ExperimentOptions opts;
    opts.dt = sc.sim.dt;
    opts.t_max = sc.experiment_t_max;
    opts.tolerance = sc.tol_experiment;
    ExperimentRecord rec = closed_loop_experiment(*net.agents[0], 0, 1.0, 1.0, opts);
    bool ok = rec.converged;
    double loop = std::abs(rec.u_ss + rec.beta * (rec.y_ss - rec.y_ref));
    MonotoneRelation rel = relation_from_agent(*net.agents[0]);
    double on_relation = std::abs(rec.u_ss - rel.inverse(rec.y_ss));
    checks.check("experiment consistency", ok && loop < 1e-9 && on_relation <= 1e-4,
                 "loop identity " + CsvWriter::format(loop) + ", relation distance " +
                     CsvWriter::format(on_relation));
  }

  std::cout << (checks.all_ok ? "verify: all checks passed\n"
                              : "verify: checks failed\n");
  return checks.all_ok ? 0 : 1;
}

}  // namespace

int run_subcommand(const std::string& command, const std::string& scenario_path,
                   const std::string& out_dir, const RunOverrides& overrides) {
  fs::path dir(out_dir);
  auto emit_error = [&dir](const Error& e) {
    json j;
    j["error"] = {{"kind", e.kind()}, {"message", e.what()}};
    std::cerr << j.dump() << "\n";
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (!ec) {
      std::ofstream out(dir / "error.json");
      out << j.dump(2) << "\n";
    }
  };

  try {
    Scenario sc = load_with_overrides(scenario_path, overrides);
    OutputContext ctx = prepare_output(sc, out_dir);
    if (command == "simulate") return cmd_simulate(sc, ctx);
    if (command == "experiment") return cmd_experiment(sc, ctx);
    if (command == "estimate-m") return cmd_estimate(sc, ctx, false);
    if (command == "synthesize") return cmd_estimate(sc, ctx, true);
    if (command == "iterate") return cmd_iterate(sc, ctx);
    if (command == "ramp") return cmd_ramp(sc, ctx);
    if (command == "case-study") return cmd_case_study(sc, ctx);
    if (command == "verify") return cmd_verify(sc, ctx);
    throw Error("cli.invalid", "unknown subcommand: " + command);
  } catch (const Error& e) {
    emit_error(e);
    std::string kind = e.kind();
    bool user_error = kind.rfind("scenario.", 0) == 0 || kind.rfind("cli.", 0) == 0 ||
                      kind.find(".invalid") != std::string::npos;
    return user_error ? 2 : 3;
  } catch (const std::exception& e) {
    emit_error(Error("internal", e.what()));
    return 3;
  }
}

}  // namespace formnet

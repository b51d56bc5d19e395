#include <doctest.h>

#include <cmath>
#include <memory>

#include "formnet/synthesis.hpp"
#include "oracles.hpp"

using namespace formnet;

namespace {

std::shared_ptr<const EdgeController> prop(double zeta_star) {
  return std::make_shared<ProportionalController>(zeta_star);
}

// true m_i = K*(y*) - K*(y0) by quadrature on the closed-form inverse relation
double true_mi(const VehicleAgent& agent, double y_star) {
  double c = agent.drag_coefficient(), w = agent.exogenous_offset();
  auto kinv = [c, w](double y) { return c * std::abs(y) * y - w; };
  double y0 = (w >= 0.0 ? 1.0 : -1.0) * std::sqrt(std::abs(w) / c);
  return oracles::integral(kinv, y0, y_star);
}

}  // namespace

TEST_CASE("two-point bound reproduces the published agent-1 number") {
  double bound = estimate_mi_two_point({3.4268, 1.5}, {0.0, -3.1294});
  CHECK(bound == doctest::Approx(15.864).epsilon(1e-4));
}

TEST_CASE("two-point bound with zero target input is zero") {
  CHECK(estimate_mi_two_point({0.0, 2.0}, {0.0, -1.0}) == 0.0);
}

TEST_CASE("two-point bound dominates the true m for the unit-slope LTI") {
  // pairs (1,1) and (0,0); true m = int_0^1 s ds = 1/2
  double bound = estimate_mi_two_point({1.0, 1.0}, {0.0, 0.0});
  CHECK(bound == doctest::Approx(1.0));
  CHECK(bound >= 0.5);
  CHECK_THROWS_AS(estimate_mi_two_point({1.0, 1.0}, {0.5, 0.0}), Error);
}

TEST_CASE("chain bound: two pairs reduce to the two-point bound") {
  double two = estimate_mi_two_point({3.4268, 1.5}, {0.0, -3.1294});
  double chain = estimate_mi_chain({{3.4268, 1.5}, {0.0, -3.1294}}, 1.5);
  CHECK(chain == doctest::Approx(two).epsilon(1e-12));
}

TEST_CASE("chain bound on the unit-slope LTI with five pairs") {
  std::vector<SteadyStatePair> pairs = {
      {0.0, 0.0}, {0.25, 0.25}, {0.5, 0.5}, {0.75, 0.75}, {1.0, 1.0}};
  double bound = estimate_mi_chain(pairs, 1.0);
  CHECK(bound == doctest::Approx(0.625).epsilon(1e-12));
  CHECK(bound >= 0.5);          // never below the true value
  CHECK(bound <= 0.5 * 1.25);   // within 25%
}

TEST_CASE("chain bound never increases when pairs are added") {
  VehicleAgent agent(1.3, 0.4);
  auto kinv = [&](double y) { return agent.closed_form_inverse().value()(y); };
  double y_star = 2.5;
  std::vector<SteadyStatePair> pairs = {{kinv(0.8), 0.8}, {0.0, std::sqrt(0.4 / 1.3)},
                                        {kinv(2.6), 2.6}};
  double coarse = estimate_mi_chain(pairs, y_star);
  for (double y : {1.2, 1.7, 2.1, 2.4}) {
    pairs.push_back({kinv(y), y});
    double refined = estimate_mi_chain(pairs, y_star);
    CHECK(refined <= coarse + 1e-12);
    coarse = refined;
  }
  CHECK(coarse >= true_mi(agent, y_star) - 1e-9);
}

TEST_CASE("chain bound handles targets left of the zero-input output") {
  VehicleAgent agent(0.1, 2.0);  // y0 = sqrt(20) = 4.47 > y* = 1.5
  auto kinv = [&](double y) { return agent.closed_form_inverse().value()(y); };
  std::vector<SteadyStatePair> pairs = {
      {kinv(5.4), 5.4}, {kinv(3.1), 3.1}, {kinv(1.2), 1.2}, {kinv(2.2), 2.2}};
  double bound = estimate_mi_chain(pairs, 1.5);
  CHECK(bound >= true_mi(agent, 1.5));
  CHECK(bound < 4.0 * true_mi(agent, 1.5) + 1.0);  // sane, not wildly loose
}

TEST_CASE("chain bound rejects inconsistent or insufficient data") {
  CHECK_THROWS_WITH_AS(estimate_mi_chain({{1.0, 0.0}, {0.0, 1.0}}, 2.0),
                       doctest::Contains("monotone"), Error);
  // all inputs positive: nothing brackets the zero-input output
  CHECK_THROWS_AS(estimate_mi_chain({{1.0, 1.0}, {2.0, 2.0}}, 1.5), Error);
}

TEST_CASE("algorithm-1 brackets on the published agent-1 experiments") {
  MiEstimate est = algorithm1_bound_from_pairs({0.9947, 0.5203}, {-0.9687, -3.1294},
                                               {3.4268, 3.5732}, 1.5);
  CHECK(est.bracket.y0_lo == doctest::Approx(-3.1294));
  CHECK(est.bracket.y0_hi == doctest::Approx(0.5203));
  CHECK(est.bracket.ustar_lo == doctest::Approx(0.9947));
  CHECK(est.bracket.ustar_hi == doctest::Approx(3.4268));
  CHECK(est.m_hat == doctest::Approx(15.864).epsilon(1e-4));
}

TEST_CASE("algorithm-1 brackets on the synthetic LTI pairs") {
  MiEstimate est =
      algorithm1_bound_from_pairs({1.0, 1.0}, {-1.0, -1.0}, {2.0, 2.0}, 1.0);
  CHECK(est.bracket.y0_lo == doctest::Approx(-1.0));
  CHECK(est.bracket.y0_hi == doctest::Approx(1.0));
  CHECK(est.bracket.ustar_lo == doctest::Approx(1.0));
  CHECK(est.bracket.ustar_hi == doctest::Approx(2.0));
  CHECK(est.m_hat == doctest::Approx(4.0));
}

TEST_CASE("algorithm-1 with simulated experiments is a sound upper bound") {
  Rng rng(2024);
  for (int trial = 0; trial < 10; ++trial) {
    VehicleAgent agent(rng.log_uniform(0.1, 10.0), rng.uniform(-2.0, 2.0));
    MiEstimate est = algorithm1_estimate_mi(agent, trial, 1.5);
    double truth = true_mi(agent, 1.5);
    CHECK(est.m_hat >= truth - 1e-6);
    REQUIRE(est.experiments.size() == 3);
    CHECK(est.experiments[0].y_ref == 100.0);
    CHECK(est.experiments[1].y_ref == -100.0);
  }
}

TEST_CASE("algorithm-1 on an agent whose target is its zero-input output") {
  VehicleAgent agent(1.0, 1.0);  // y0 = 1
  MiEstimate est = algorithm1_estimate_mi(agent, 0, 1.0);
  CHECK(est.m_hat >= 0.0);
  CHECK(true_mi(agent, 1.0) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("exact LTI estimate from a single pair") {
  CHECK(estimate_mi_lti({2.0, 1.0}, 1.5) == doctest::Approx(2.25));
  CHECK(estimate_mi_lti({2.0, 1.0}, 0.0) == 0.0);
  CHECK(estimate_mi_lti({0.0, 0.0}, 1.5) == 0.0);
  CHECK_THROWS_AS(estimate_mi_lti({0.0, 1.0}, 1.5), Error);
  CHECK_THROWS_AS(estimate_mi_lti({-1.0, 1.0}, 1.5), Error);

  LtiFirstOrderAgent agent(3.0);
  ExperimentOptions opts;
  opts.t_max = 60.0;
  opts.tolerance = 1e-10;
  ExperimentRecord rec = closed_loop_experiment(agent, 0, 1.0, 2.0, opts);
  REQUIRE(rec.converged);
  double m = estimate_mi_lti({rec.u_ss, rec.y_ss}, 1.5);
  CHECK(m == doctest::Approx(0.5 * 3.0 * 1.5 * 1.5).epsilon(1e-6));
}

TEST_CASE("compute_M on quadratic potentials") {
  Graph g = Graph::cycle(30);
  Eigen::MatrixXd E = incidence_matrix(g);
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(30);

  SUBCASE("per-edge arithmetic: |E| eps^2") {
    std::vector<std::shared_ptr<StaticController>> owned;
    std::vector<const StaticController*> ctrls;
    for (int e = 0; e < 30; ++e) {
      owned.push_back(std::make_shared<ProportionalController>(0.0));
      ctrls.push_back(owned.back().get());
    }
    CHECK(compute_M(ctrls, zero, 0.2, E, MMode::per_edge) ==
          doctest::Approx(1.2).epsilon(1e-12));
  }

  SUBCASE("euclidean minimum of ||zeta||^2 over the sphere is eps^2") {
    // potential zeta^2 corresponds to the map 2*zeta
    std::vector<std::shared_ptr<StaticController>> owned;
    std::vector<const StaticController*> ctrls;
    for (int e = 0; e < 30; ++e) {
      owned.push_back(std::make_shared<CustomStaticController>(
          [](double z) { return 2.0 * z; }, 0.0, [](double) { return 2.0; },
          [](double z) { return z * z; }));
      ctrls.push_back(owned.back().get());
    }
    CHECK(compute_M(ctrls, zero, 0.2, E, MMode::euclidean) ==
          doctest::Approx(0.04).epsilon(1e-6));
  }
}

TEST_CASE("compute_M euclidean on a non-uniform potential") {
  // one stiff cubic edge makes the sphere minimum direction-dependent
  Graph g = Graph::cycle(3);
  Eigen::MatrixXd E = incidence_matrix(g);
  Eigen::VectorXd zstar = Eigen::VectorXd::Zero(3);
  std::vector<std::shared_ptr<StaticController>> owned;
  owned.push_back(std::make_shared<CustomStaticController>(
      [](double z) { return z * z * z + 10.0 * z; }, 0.0));
  owned.push_back(std::make_shared<ProportionalController>(0.0));
  owned.push_back(std::make_shared<ProportionalController>(0.0));
  std::vector<const StaticController*> ctrls;
  for (const auto& c : owned) ctrls.push_back(c.get());

  double M = compute_M(ctrls, zstar, 0.5, E, MMode::euclidean);
  CHECK(M > 0.0);
  CHECK(compute_M(ctrls, zstar, 0.5, E, MMode::per_edge) > 0.0);

  // oracle: M is no larger than the potential at any sampled sphere point
  Eigen::MatrixXd B = edge_space_basis(E);
  Rng rng(5150);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd s(B.cols());
    for (int i = 0; i < s.size(); ++i) s(i) = rng.uniform(-1.0, 1.0);
    if (s.norm() < 1e-9) continue;
    Eigen::VectorXd zeta = 0.5 * (B * s.normalized());
    double val = 0.0;
    for (int e = 0; e < 3; ++e) val += ctrls[e]->potential(zeta(e));
    CHECK(M <= val + 1e-7);
  }
}

TEST_CASE("uniform-gain synthesis end to end on the two-LTI toy") {
  Network net = Network::make(Graph::path(2),
                              {std::make_shared<LtiFirstOrderAgent>(1.0),
                               std::make_shared<LtiFirstOrderAgent>(1.0)},
                              {prop(1.0)});
  Eigen::VectorXd zeta_star = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd y_star(2);
  y_star << 0.5, -0.5;

  SynthesisOptions opts;
  opts.method = MiMethod::lti_exact;
  opts.m_mode = MMode::euclidean;
  EstimateReport report = algorithm2_uniform_gain(net, zeta_star, 0.1, opts, y_star);

  // m = 2 * K*(0.5) = 2 * (0.5 * 0.25) = 0.25, M = eps^2 / 2
  CHECK(report.m_hat == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(report.M_euclidean == doctest::Approx(0.005).epsilon(1e-6));
  CHECK(report.alpha == doctest::Approx(50.0).epsilon(1e-5));

  // the synthesized loop meets the goal
  SteadyStateProblem p(net, Eigen::VectorXd::Constant(1, report.alpha));
  SteadyStateSolution sol = solve_network_steady_state(p);
  CHECK((sol.zeta - zeta_star).norm() <= 0.1);
}

TEST_CASE("published case-study arithmetic: alpha = m / (|E| eps^2)") {
  CHECK(256.3658 / 1.2 == doctest::Approx(213.638).epsilon(1e-5));
}

TEST_CASE("chain synthesis tightens the three-experiment bound") {
  Rng rng(808);
  Graph g = Graph::cycle(6);
  std::vector<std::shared_ptr<const Agent>> agents;
  for (int i = 0; i < 6; ++i)
    agents.push_back(std::make_shared<VehicleAgent>(rng.log_uniform(0.1, 10.0),
                                                    rng.uniform(-2.0, 2.0)));
  std::vector<std::shared_ptr<const EdgeController>> ctrls(6, prop(0.0));
  Network net = Network::make(g, agents, ctrls);
  Eigen::VectorXd zeta_star = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd y_star = Eigen::VectorXd::Constant(6, 1.5);

  double prev = std::numeric_limits<double>::infinity();
  for (int k : {3, 4, 10}) {
    SynthesisOptions opts;
    opts.method = k == 3 ? MiMethod::three_experiments : MiMethod::chain;
    opts.measurements_per_agent = k;
    opts.seed = 99;
    EstimateReport rep = algorithm2_uniform_gain(net, zeta_star, 0.2, opts, y_star);
    CHECK(rep.m_hat <= prev + 1e-9);
    // soundness at every size
    for (int i = 0; i < 6; ++i) {
      const auto& vehicle = dynamic_cast<const VehicleAgent&>(*agents[i]);
      CHECK(rep.per_agent[i].m_hat >= true_mi(vehicle, 1.5) - 1e-6);
    }
    prev = rep.m_hat;
  }
}

TEST_CASE("iterative tuning with proportional controllers marches uniformly") {
  Rng rng(404);
  Graph g = Graph::cycle(8);
  std::vector<std::shared_ptr<const Agent>> agents;
  for (int i = 0; i < 8; ++i)
    agents.push_back(std::make_shared<VehicleAgent>(rng.log_uniform(0.1, 10.0),
                                                    rng.uniform(-2.0, 2.0)));
  std::vector<std::shared_ptr<const EdgeController>> ctrls(8, prop(0.0));
  Network net = Network::make(g, agents, ctrls);

  IterateOptions opts;
  opts.h = 2.0;
  opts.max_iterations = 300;
  IterateResult res = algorithm3_iterate(net, Eigen::VectorXd::Zero(8), 0.2,
                                         Eigen::VectorXd::Constant(8, 0.1), opts);
  REQUIRE(res.log.halted);
  for (size_t j = 0; j < res.log.rows.size(); ++j) {
    const IterationRow& row = res.log.rows[j];
    // v = 1 on every edge away from the goal, so gains stay uniform
    CHECK(row.gains.maxCoeff() - row.gains.minCoeff() < 1e-12);
    CHECK(row.gains(0) == doctest::Approx(0.1 + 2.0 * j).epsilon(1e-12));
    if (j > 0) CHECK(row.eps < res.log.rows[j - 1].eps);
    if (j + 1 < res.log.rows.size())
      CHECK(row.v.isApprox(Eigen::VectorXd::Ones(8), 1e-12));
  }
  CHECK(res.log.rows.back().eps <= 0.2);
}

TEST_CASE("iterative tuning halts immediately when the goal already holds") {
  Network net = Network::make(Graph::path(2),
                              {std::make_shared<IntegratorAgent>(),
                               std::make_shared<IntegratorAgent>()},
                              {prop(1.0)});
  IterateResult res = algorithm3_iterate(net, Eigen::VectorXd::Ones(1), 0.2,
                                         Eigen::VectorXd::Constant(1, 0.7), {});
  CHECK(res.log.halted);
  CHECK(res.log.rows.size() == 1);
  CHECK(res.gains(0) == 0.7);
}

TEST_CASE("iterative tuning rejects steps that kill a gain") {
  // controllers rooted away from the target push v negative
  Network net = Network::make(Graph::path(2),
                              {std::make_shared<LtiFirstOrderAgent>(1.0),
                               std::make_shared<LtiFirstOrderAgent>(1.0)},
                              {prop(1.0)});
  IterateOptions opts;
  opts.h = 50.0;
  CHECK_THROWS_WITH_AS(algorithm3_iterate(net, Eigen::VectorXd::Zero(1), 1e-6,
                                          Eigen::VectorXd::Constant(1, 0.5), opts),
                       doctest::Contains("step size too large"), Error);
}

TEST_CASE("lemma-4 box: iterates stay inside the analytic bound") {
  Rng rng(360);
  Graph g = Graph::cycle(6);
  std::vector<std::shared_ptr<const Agent>> agents;
  for (int i = 0; i < 6; ++i)
    agents.push_back(std::make_shared<VehicleAgent>(rng.log_uniform(0.1, 10.0),
                                                    rng.uniform(-2.0, 2.0)));
  std::vector<std::shared_ptr<const EdgeController>> ctrls(6, prop(0.0));
  Network net = Network::make(g, agents, ctrls);
  Eigen::VectorXd zeta_star = Eigen::VectorXd::Zero(6);
  Eigen::VectorXd a = Eigen::VectorXd::Constant(6, 0.1);

  // z_i = zero-input outputs, omega = (C + ||zeta_star||) diam(G)
  Eigen::VectorXd z(6);
  for (int i = 0; i < 6; ++i) z(i) = relation_from_agent(*agents[i]).zero_input_output();
  SteadyStateProblem p(net, a);
  double C = (solve_network_steady_state(p).zeta - zeta_star).norm();
  double omega = (C + zeta_star.norm()) * g.diameter();
  double lo = z.minCoeff() - omega - 1.0, hi = z.maxCoeff() + omega + 1.0;

  IterateOptions opts;
  opts.max_iterations = 300;
  IterateResult res = algorithm3_iterate(net, zeta_star, 0.2, a, opts);
  REQUIRE(res.log.halted);
  for (const auto& row : res.log.rows) {
    Eigen::VectorXd y = solve_network_steady_state(p.with_gains(row.gains)).y;
    CHECK(y.minCoeff() >= lo);
    CHECK(y.maxCoeff() <= hi);
  }
}

TEST_CASE("slow ramp returns the first gain meeting the goal") {
  SUBCASE("integrator agents pass at the schedule head") {
    Network net = Network::make(Graph::path(3),
                                {std::make_shared<IntegratorAgent>(),
                                 std::make_shared<IntegratorAgent>(),
                                 std::make_shared<IntegratorAgent>()},
                                {prop(0.5), prop(-0.5)});
    Eigen::VectorXd zeta_star(2);
    zeta_star << 0.5, -0.5;
    SimOptions sim;
    sim.t_max = 80.0;
    sim.tolerance = 1e-6;
    RampResult res = slow_ramp(net, zeta_star, 0.2, {1.0, 10.0}, SteadyStateMode::simulate,
                               sim);
    CHECK(res.alpha == 1.0);
    CHECK(res.attempts.size() == 1);
  }

  SUBCASE("vehicles need a few rungs, oracle mode") {
    Rng rng(2718);
    Graph g = Graph::cycle(5);
    std::vector<std::shared_ptr<const Agent>> agents;
    for (int i = 0; i < 5; ++i)
      agents.push_back(std::make_shared<VehicleAgent>(rng.log_uniform(0.1, 10.0),
                                                      rng.uniform(-2.0, 2.0)));
    std::vector<std::shared_ptr<const EdgeController>> ctrls(5, prop(0.0));
    Network net = Network::make(g, agents, ctrls);
    RampResult res = slow_ramp(net, Eigen::VectorXd::Zero(5), 0.05,
                               {1.0, 10.0, 100.0, 1000.0}, SteadyStateMode::oracle, {});
    CHECK(res.alpha <= 1000.0);
    CHECK(res.attempts.back().second <= 0.05);
    // distances shrink along the schedule
    for (size_t k = 1; k < res.attempts.size(); ++k)
      CHECK(res.attempts[k].second < res.attempts[k - 1].second);
  }

  SUBCASE("exhausted schedule reports the last distance") {
    Network net = Network::make(Graph::path(2),
                                {std::make_shared<LtiFirstOrderAgent>(1.0),
                                 std::make_shared<LtiFirstOrderAgent>(1.0)},
                                {prop(1.0)});
    CHECK_THROWS_WITH_AS(slow_ramp(net, Eigen::VectorXd::Ones(1), 1e-6, {0.5, 1.0},
                                   SteadyStateMode::oracle, {}),
                         doctest::Contains("schedule exhausted"), Error);
  }
}

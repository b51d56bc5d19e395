#include <doctest.h>

#include <cmath>
#include <memory>

#include "formnet/numeric.hpp"
#include "formnet/relations.hpp"
#include "oracles.hpp"

using namespace formnet;

TEST_CASE("relation of the LTI agent with slope 2") {
  LtiFirstOrderAgent agent(2.0);
  MonotoneRelation rel = relation_from_agent(agent);
  CHECK(rel.inverse(1.5) == doctest::Approx(3.0));
  CHECK(rel.conjugate_potential(1.5) == doctest::Approx(2.25).epsilon(1e-9));
  CHECK(rel.zero_input_output() == doctest::Approx(0.0));
  CHECK(rel.inverse_derivative(0.3) == doctest::Approx(2.0));
}

TEST_CASE("relation of the integrator is flat with zero potential") {
  IntegratorAgent agent;
  MonotoneRelation rel = relation_from_agent(agent);
  CHECK(rel.identically_zero_inverse());
  for (double y : {-3.0, 0.0, 7.5}) {
    CHECK(rel.inverse(y) == 0.0);
    CHECK(rel.conjugate_potential(y) == 0.0);
  }
  CHECK_THROWS_AS(rel.forward(0.0), Error);
}

TEST_CASE("vehicle relation against the quadrature oracle") {
  VehicleAgent agent(1.0, 0.0);
  MonotoneRelation rel = relation_from_agent(agent);
  CHECK(rel.inverse(2.0) == doctest::Approx(4.0));
  double expected = oracles::integral([](double s) { return s * s; }, 0.0, 2.0);
  CHECK(expected == doctest::Approx(8.0 / 3.0).epsilon(1e-9));
  CHECK(rel.conjugate_potential(2.0) == doctest::Approx(expected).epsilon(1e-6));
}

TEST_CASE("vehicle with exogenous force anchors at its zero-input output") {
  VehicleAgent agent(0.5, 2.0);
  MonotoneRelation rel = relation_from_agent(agent);
  double y0 = rel.zero_input_output();
  CHECK(y0 == doctest::Approx(2.0));  // 0.5*|y|y = 2
  CHECK(rel.conjugate_potential(y0) == doctest::Approx(0.0));
  double expected =
      oracles::integral([](double s) { return 0.5 * std::abs(s) * s - 2.0; }, 2.0, 3.0);
  CHECK(rel.conjugate_potential(3.0) == doctest::Approx(expected).epsilon(1e-8));
}

TEST_CASE("sampled relations interpolate and invert consistently") {
  // cubic-plus-linear agent, no closed form: samples drive everything
  ControlAffineAgent agent([](double x) { return x * x * x + x; },
                           [](double) { return 1.0; }, [](double x) { return x; });
  MonotoneRelation rel = relation_from_agent(agent, {-5.0, 5.0}, 4001);
  REQUIRE(rel.sampled());
  for (double u : {-20.0, -3.0, 0.0, 1.0, 17.0}) {
    double y = rel.forward(u);
    CHECK(rel.inverse(y) == doctest::Approx(u).epsilon(1e-9));
  }
  // derivative matches 3y^2 + 1 away from the grid resolution
  CHECK(rel.inverse_derivative(1.0) == doctest::Approx(4.0).epsilon(1e-3));
}

TEST_CASE("from_samples rejects non-monotone data") {
  CHECK_THROWS_WITH_AS(MonotoneRelation::from_samples({0.0, 1.0, 1.0}, {0.0, 1.0, 2.0}),
                       doctest::Contains("outputs not strictly increasing"), Error);
  CHECK_THROWS_WITH_AS(MonotoneRelation::from_samples({0.0, 1.0, 2.0}, {0.0, 1.0, 0.5}),
                       doctest::Contains("inputs decrease"), Error);
  CHECK_THROWS_AS(MonotoneRelation::from_samples({0.0}, {0.0}), Error);
}

TEST_CASE("legendre transform of the self-conjugate quadratic") {
  ConvexFn half_square{[](double u) { return 0.5 * u * u; }, {-10.0, 10.0}};
  CHECK(legendre_transform(half_square, 3.0) == doctest::Approx(4.5).epsilon(1e-8));
  CHECK(legendre_transform(half_square, 0.0) == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("legendre transform of |u| is the indicator of [-1, 1]") {
  ConvexFn abs_fn{[](double u) { return std::abs(u); }, {-10.0, 10.0}};
  CHECK(legendre_transform(abs_fn, 0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK_THROWS_WITH_AS(legendre_transform(abs_fn, 1.5),
                       doctest::Contains("domain too small"), Error);
}

TEST_CASE("fenchel identity on the vehicle potential pair") {
  auto rel = std::make_shared<MonotoneRelation>(
      relation_from_agent(VehicleAgent(1.0, 0.0)));
  ConvexIntegralFn fn = ConvexIntegralFn::from_agent_relation(rel);
  Rng rng(11);
  for (int k = 0; k < 12; ++k) {
    double y = rng.uniform(-4.0, 4.0);
    double u = rel->inverse(y);
    double residual = std::abs(fn.primal(u) + fn.conjugate(y) - u * y);
    CHECK(residual < 1e-5);
  }
}

TEST_CASE("fenchel residual on every stored sample point of a sampled relation") {
  ControlAffineAgent agent([](double x) { return x * x * x + 0.5 * x; },
                           [](double) { return 1.0; }, [](double x) { return x; });
  auto rel = std::make_shared<MonotoneRelation>(relation_from_agent(agent, {-3.0, 3.0}, 241));
  ConvexIntegralFn fn = ConvexIntegralFn::from_agent_relation(rel);
  double worst = 0.0;
  for (size_t k = 0; k < rel->sample_outputs().size(); k += 16) {
    double y = rel->sample_outputs()[k];
    double u = rel->sample_inputs()[k];
    worst = std::max(worst, std::abs(fn.primal(u) + fn.conjugate(y) - u * y));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("integral functions are midpoint convex on sampled triples") {
  auto rel = std::make_shared<MonotoneRelation>(
      relation_from_agent(VehicleAgent(2.0, -1.0)));
  ConvexIntegralFn fn = ConvexIntegralFn::from_agent_relation(rel);
  Rng rng(21);
  for (int k = 0; k < 20; ++k) {
    double a = rng.uniform(-4.0, 4.0), b = rng.uniform(-4.0, 4.0);
    double mid = fn.conjugate(0.5 * (a + b));
    CHECK(mid <= 0.5 * (fn.conjugate(a) + fn.conjugate(b)) + 1e-9);
  }
}

TEST_CASE("controller potential built from a subgradient") {
  ConvexIntegralFn fn = ConvexIntegralFn::from_subgradient(
      [](double z) { return z - 1.0; }, 1.0, {-20.0, 20.0});
  CHECK(fn.primal(3.0) == doctest::Approx(2.0).epsilon(1e-9));   // (3-1)^2/2
  CHECK(fn.conjugate(2.0) == doctest::Approx(4.0).epsilon(1e-7));  // mu + mu^2/2
}

TEST_CASE("relation extraction rejects non-monotone agents") {
  ControlAffineAgent sine([](double x) { return std::sin(3.0 * x); },
                          [](double) { return 1.0; }, [](double x) { return x; });
  CHECK_THROWS_AS(relation_from_agent(sine, {-3.0, 3.0}, 301), Error);
}

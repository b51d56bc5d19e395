#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "formnet/systems.hpp"

namespace formnet {

// Single-valued maximal-monotone steady-state relation, stored either as a
// closed-form inverse map k^{-1} or as sampled (y, u) pairs with a monotone
// piecewise-linear interpolant. `conjugate_potential` is K*(y), the convex
// integral of k^{-1} anchored to zero at the zero-input output y0, so that
// K(0) = -min K* = 0 and differences of K* carry all the information used
// downstream.
class MonotoneRelation {
 public:
  // Samples must have strictly increasing outputs and nondecreasing inputs;
  // violations are rejected with a diagnostic.
  static MonotoneRelation from_samples(std::vector<double> outputs,
                                       std::vector<double> inputs);
  static MonotoneRelation closed_form(
      std::function<double(double)> inverse_map, Interval domain,
      std::function<double(double)> inverse_derivative = nullptr,
      bool identically_zero = false);

  // k^{-1}(y). Sampled relations extrapolate linearly with the end-segment
  // slope outside the stored range.
  double inverse(double y) const;
  // k(u) by monotone inversion; throws for flat relations ("relation.flat").
  double forward(double u) const;
  double inverse_derivative(double y) const;
  // y0 with k^{-1}(y0) = 0; for flat relations this is pinned to 0.
  double zero_input_output() const;
  // K*(y) with K*(y0) = 0. Trapezoid prefix sums on the sample grid for
  // sampled relations; adaptive quadrature for closed forms.
  double conjugate_potential(double y) const;

  Interval domain() const { return domain_; }
  bool identically_zero_inverse() const { return flat_; }
  bool sampled() const { return !samples_y_.empty(); }
  const std::vector<double>& sample_outputs() const { return samples_y_; }
  const std::vector<double>& sample_inputs() const { return samples_u_; }

 private:
  MonotoneRelation() = default;

  std::function<double(double)> kinv_;
  std::function<double(double)> dkinv_;
  Interval domain_;
  bool flat_ = false;
  double y0_ = 0.0;
  std::vector<double> samples_y_, samples_u_;
  std::vector<double> prefix_integral_;  // trapezoid of u over samples_y_
};

// Extracts the steady-state relation of an agent along a state grid. Uses the
// family's closed form when it has one (the grid then only fixes the domain);
// otherwise samples (u(sigma), y(sigma)) and interpolates.
MonotoneRelation relation_from_agent(const Agent& agent,
                                     Interval domain = {-50.0, 50.0},
                                     int grid = 2001);

// A convex function given by an evaluator on a finite domain; the domain must
// bracket the maximizer of u*y - f(u) for conjugation to make sense.
struct ConvexFn {
  std::function<double(double)> value;
  Interval domain;
};

// Legendre transform f*(y) = sup_u { u y - f(u) } over the stated domain,
// located by golden section. Throws "relations.unbounded" when the supremum
// sits on the boundary with outward slope, i.e. the domain is too small.
double legendre_transform(const ConvexFn& fn, double point);

// Paired convex potential and conjugate tied to one relation: (K, K*) for an
// agent or (Gamma, Gamma*) for a controller. Whatever side is not integrated
// directly is obtained by Legendre transform.
class ConvexIntegralFn {
 public:
  // K*(y) integrated from the relation; K(u) via transform over the output
  // domain.
  static ConvexIntegralFn from_agent_relation(std::shared_ptr<const MonotoneRelation> rel);
  // Gamma(zeta) integrated from a subgradient with gamma(root) = 0; Gamma*
  // via transform.
  static ConvexIntegralFn from_subgradient(std::function<double(double)> gamma,
                                           double root, Interval domain);

  double primal(double u) const;     // K(u) or Gamma(zeta)
  double conjugate(double y) const;  // K*(y) or Gamma*(mu)

  const ConvexFn& primal_fn() const { return primal_; }
  const ConvexFn& conjugate_fn() const { return conjugate_; }
  std::shared_ptr<const MonotoneRelation> relation() const { return relation_; }

 private:
  ConvexFn primal_, conjugate_;
  std::shared_ptr<const MonotoneRelation> relation_;
};

}  // namespace formnet

#include "formnet/relations.hpp"

#include <algorithm>
#include <cmath>

#include "formnet/numeric.hpp"

namespace formnet {

MonotoneRelation MonotoneRelation::from_samples(std::vector<double> outputs,
                                                std::vector<double> inputs) {
  require(outputs.size() == inputs.size(), "relation.invalid",
          "sample arrays differ in length");
  require(outputs.size() >= 2, "relation.invalid", "need at least two samples");
  for (size_t i = 0; i + 1 < outputs.size(); ++i) {
    require(std::isfinite(outputs[i]) && std::isfinite(inputs[i]),
            "relation.invalid", "non-finite sample at index " + std::to_string(i));
    require(outputs[i + 1] > outputs[i], "relation.non_monotone",
            "outputs not strictly increasing at index " + std::to_string(i) +
                ": y=" + std::to_string(outputs[i]) + " then " +
                std::to_string(outputs[i + 1]));
    require(inputs[i + 1] >= inputs[i] - 1e-12, "relation.non_monotone",
            "inputs decrease at index " + std::to_string(i) +
                ": u=" + std::to_string(inputs[i]) + " then " +
                std::to_string(inputs[i + 1]));
  }

  MonotoneRelation r;
  r.samples_y_ = std::move(outputs);
  r.samples_u_ = std::move(inputs);
  r.domain_ = {r.samples_y_.front(), r.samples_y_.back()};

  r.prefix_integral_.resize(r.samples_y_.size(), 0.0);
  for (size_t i = 1; i < r.samples_y_.size(); ++i) {
    double dy = r.samples_y_[i] - r.samples_y_[i - 1];
    r.prefix_integral_[i] = r.prefix_integral_[i - 1] +
                            0.5 * (r.samples_u_[i] + r.samples_u_[i - 1]) * dy;
  }

  r.flat_ = std::all_of(r.samples_u_.begin(), r.samples_u_.end(),
                        [](double u) { return std::abs(u) < 1e-14; });
  if (r.flat_) {
    r.y0_ = 0.0;
  } else if (r.samples_u_.front() > 0.0) {
    r.y0_ = r.samples_y_.front();  // zero crossing left of the data
  } else if (r.samples_u_.back() < 0.0) {
    r.y0_ = r.samples_y_.back();
  } else {
    // piecewise-linear zero crossing: last sample with u <= 0, then interpolate
    size_t lo = 0;
    for (size_t k = 0; k < r.samples_u_.size(); ++k)
      if (r.samples_u_[k] <= 0.0) lo = k;
    if (r.samples_u_[lo] == 0.0 || lo + 1 >= r.samples_u_.size()) {
      r.y0_ = r.samples_y_[lo];
    } else {
      double u0 = r.samples_u_[lo], u1 = r.samples_u_[lo + 1];
      double t = -u0 / (u1 - u0);
      r.y0_ = r.samples_y_[lo] + t * (r.samples_y_[lo + 1] - r.samples_y_[lo]);
    }
  }
  return r;
}

MonotoneRelation MonotoneRelation::closed_form(
    std::function<double(double)> inverse_map, Interval domain,
    std::function<double(double)> inverse_derivative, bool identically_zero) {
  require(static_cast<bool>(inverse_map), "relation.invalid",
          "closed-form relation needs an inverse map");
  require(domain.width() > 0.0, "relation.invalid", "empty relation domain");
  MonotoneRelation r;
  r.kinv_ = std::move(inverse_map);
  r.dkinv_ = std::move(inverse_derivative);
  r.domain_ = domain;
  r.flat_ = identically_zero;
  if (r.flat_) {
    r.y0_ = 0.0;
  } else {
    double flo = r.kinv_(domain.lo), fhi = r.kinv_(domain.hi);
    require(flo <= fhi, "relation.non_monotone",
            "inverse map decreases across the domain");
    if (flo > 0.0)
      r.y0_ = domain.lo;
    else if (fhi < 0.0)
      r.y0_ = domain.hi;
    else
      r.y0_ = monotone_bisect(r.kinv_, domain.lo, domain.hi);
  }
  return r;
}

double MonotoneRelation::inverse(double y) const {
  if (kinv_) return kinv_(y);
  const auto& ys = samples_y_;
  const auto& us = samples_u_;
  if (y <= ys.front()) {
    double slope = (us[1] - us[0]) / (ys[1] - ys[0]);
    return us.front() + slope * (y - ys.front());
  }
  if (y >= ys.back()) {
    size_t n = ys.size();
    double slope = (us[n - 1] - us[n - 2]) / (ys[n - 1] - ys[n - 2]);
    return us.back() + slope * (y - ys.back());
  }
  auto it = std::upper_bound(ys.begin(), ys.end(), y);
  size_t hi = static_cast<size_t>(it - ys.begin());
  size_t lo = hi - 1;
  double t = (y - ys[lo]) / (ys[hi] - ys[lo]);
  return us[lo] + t * (us[hi] - us[lo]);
}

double MonotoneRelation::forward(double u) const {
  require(!flat_, "relation.flat",
          "forward map of a flat relation is set-valued");
  double lo = domain_.lo, hi = domain_.hi;
  double flo = inverse(lo) - u, fhi = inverse(hi) - u;
  require(flo <= 0.0 && fhi >= 0.0, "relation.range",
          "input outside the relation's sampled range");
  return monotone_bisect([this, u](double y) { return inverse(y) - u; }, lo, hi);
}

double MonotoneRelation::inverse_derivative(double y) const {
  if (dkinv_) return dkinv_(y);
  if (kinv_) return std::max(0.0, central_difference(kinv_, y));
  const auto& ys = samples_y_;
  const auto& us = samples_u_;
  size_t n = ys.size();
  size_t hi;
  if (y <= ys.front())
    hi = 1;
  else if (y >= ys.back())
    hi = n - 1;
  else
    hi = static_cast<size_t>(std::upper_bound(ys.begin(), ys.end(), y) - ys.begin());
  return (us[hi] - us[hi - 1]) / (ys[hi] - ys[hi - 1]);
}

double MonotoneRelation::zero_input_output() const { return y0_; }

double MonotoneRelation::conjugate_potential(double y) const {
  if (flat_) return 0.0;
  if (kinv_) return adaptive_simpson(kinv_, y0_, y, 1e-11);

  const auto& ys = samples_y_;
  auto integral_to = [&](double t) {
    // prefix integral from ys.front() to t, with linear extrapolation tails
    if (t <= ys.front()) {
      double u_t = inverse(t);
      return -0.5 * (u_t + samples_u_.front()) * (ys.front() - t);
    }
    if (t >= ys.back()) {
      double u_t = inverse(t);
      return prefix_integral_.back() + 0.5 * (samples_u_.back() + u_t) * (t - ys.back());
    }
    auto it = std::upper_bound(ys.begin(), ys.end(), t);
    size_t hi = static_cast<size_t>(it - ys.begin());
    size_t lo = hi - 1;
    double u_t = inverse(t);
    return prefix_integral_[lo] + 0.5 * (samples_u_[lo] + u_t) * (t - ys[lo]);
  };
  return integral_to(y) - integral_to(y0_);
}

MonotoneRelation relation_from_agent(const Agent& agent, Interval domain, int grid) {
  if (auto kinv = agent.closed_form_inverse()) {
    std::function<double(double)> dkinv = nullptr;
    if (auto d = agent.closed_form_inverse_derivative()) dkinv = *d;
    return MonotoneRelation::closed_form(*kinv, domain, dkinv,
                                         agent.flat_inverse_relation());
  }
  require(grid >= 2, "relation.invalid", "sampling grid needs at least 2 points");
  std::vector<double> ys(grid), us(grid);
  for (int i = 0; i < grid; ++i) {
    double sigma = domain.lo + domain.width() * i / (grid - 1);
    ys[i] = agent.steady_state_output(sigma);
    us[i] = agent.steady_state_input(sigma);
  }
  return MonotoneRelation::from_samples(std::move(ys), std::move(us));
}

double legendre_transform(const ConvexFn& fn, double point) {
  require(static_cast<bool>(fn.value), "relations.invalid", "empty convex function");
  const double lo = fn.domain.lo, hi = fn.domain.hi;
  auto g = [&](double u) { return point * u - fn.value(u); };
  double u_star = golden_section_max(g, lo, hi);

  // A supremum pinned to the boundary with outward slope means the true
  // conjugate lives outside the domain.
  double width = fn.domain.width();
  double probe = 1e-7 * std::max(1.0, width);
  if (u_star - lo < 1e-6 * width && g(lo) > g(lo + probe) + 1e-14)
    throw Error("relations.unbounded", "domain too small: supremum at lower boundary");
  if (hi - u_star < 1e-6 * width && g(hi) > g(hi - probe) + 1e-14)
    throw Error("relations.unbounded", "domain too small: supremum at upper boundary");
  return std::max({g(u_star), g(lo), g(hi)});
}

ConvexIntegralFn ConvexIntegralFn::from_agent_relation(
    std::shared_ptr<const MonotoneRelation> rel) {
  require(static_cast<bool>(rel), "relations.invalid", "null relation");
  ConvexIntegralFn fn;
  fn.relation_ = rel;
  Interval ydom = rel->domain();
  fn.conjugate_ = ConvexFn{[rel](double y) { return rel->conjugate_potential(y); }, ydom};
  Interval udom{rel->inverse(ydom.lo), rel->inverse(ydom.hi)};
  if (udom.width() <= 0.0) udom = {udom.lo - 1.0, udom.hi + 1.0};
  ConvexFn conj = fn.conjugate_;
  fn.primal_ = ConvexFn{[conj](double u) { return legendre_transform(conj, u); }, udom};
  return fn;
}

ConvexIntegralFn ConvexIntegralFn::from_subgradient(std::function<double(double)> gamma,
                                                    double root, Interval domain) {
  require(static_cast<bool>(gamma), "relations.invalid", "null subgradient");
  ConvexIntegralFn fn;
  auto primal_value = [gamma, root](double z) {
    return adaptive_simpson(gamma, root, z, 1e-11);
  };
  fn.primal_ = ConvexFn{primal_value, domain};
  Interval mudom{gamma(domain.lo), gamma(domain.hi)};
  if (mudom.width() <= 0.0) mudom = {mudom.lo - 1.0, mudom.hi + 1.0};
  ConvexFn primal = fn.primal_;
  fn.conjugate_ =
      ConvexFn{[primal](double mu) { return legendre_transform(primal, mu); }, mudom};
  return fn;
}

double ConvexIntegralFn::primal(double u) const { return primal_.value(u); }
double ConvexIntegralFn::conjugate(double y) const { return conjugate_.value(y); }

}  // namespace formnet

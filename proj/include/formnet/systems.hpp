#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "formnet/error.hpp"

namespace formnet {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Scalar-state SISO agent. Besides the time-domain maps, every family exposes
// its steady-state input-output curve parameterized by the internal state:
// sigma -> (u(sigma), y(sigma)), the graph of the inverse relation k^{-1}.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual double derivative(double x, double u) const = 0;
  virtual double output(double x) const = 0;

  virtual double steady_state_input(double sigma) const = 0;
  virtual double steady_state_output(double sigma) const = 0;

  // Closed-form k^{-1}(y) when the family has one; lets downstream code build
  // exact relations instead of sampled ones.
  virtual std::optional<std::function<double(double)>> closed_form_inverse() const {
    return std::nullopt;
  }
  virtual std::optional<std::function<double(double)>> closed_form_inverse_derivative()
      const {
    return std::nullopt;
  }
  // True when k^{-1} is identically zero (integrator dynamics).
  virtual bool flat_inverse_relation() const { return false; }
  virtual bool is_lti() const { return false; }
  virtual std::string family() const = 0;
};

// x' = -f(x) + g(x) u + w, y = h(x), with g > 0. The constant w models an
// exogenous force; at steady state u = (f(x) - w) / g(x).
class ControlAffineAgent : public Agent {
 public:
  ControlAffineAgent(std::function<double(double)> f, std::function<double(double)> g,
                     std::function<double(double)> h, double w = 0.0);

  double derivative(double x, double u) const override;
  double output(double x) const override { return h_(x); }
  double steady_state_input(double sigma) const override;
  double steady_state_output(double sigma) const override { return h_(sigma); }
  std::string family() const override { return "control_affine"; }

  double f(double x) const { return f_(x); }
  double g(double x) const { return g_(x); }
  double h(double x) const { return h_(x); }
  double exogenous_offset() const { return w_; }

 private:
  std::function<double(double)> f_, g_, h_;
  double w_;
};

// Case-study vehicle: x' = -c_d |x| x + u + w, y = x.
class VehicleAgent : public ControlAffineAgent {
 public:
  VehicleAgent(double drag_coefficient, double exogenous_force);

  std::optional<std::function<double(double)>> closed_form_inverse() const override;
  std::optional<std::function<double(double)>> closed_form_inverse_derivative()
      const override;
  std::string family() const override { return "vehicle_drag"; }

  double drag_coefficient() const { return cd_; }

 private:
  double cd_;
};

// Stable first-order LTI agent with steady-state relation u = s y, s > 0.
// Realized as x' = u - s x, y = x.
class LtiFirstOrderAgent : public Agent {
 public:
  explicit LtiFirstOrderAgent(double slope);

  double derivative(double x, double u) const override { return u - slope_ * x; }
  double output(double x) const override { return x; }
  double steady_state_input(double sigma) const override { return slope_ * sigma; }
  double steady_state_output(double sigma) const override { return sigma; }
  std::optional<std::function<double(double)>> closed_form_inverse() const override;
  std::optional<std::function<double(double)>> closed_form_inverse_derivative()
      const override;
  bool is_lti() const override { return true; }
  std::string family() const override { return "lti_first_order"; }

  double slope() const { return slope_; }

 private:
  double slope_;
};

// x' = u, y = x. Its inverse relation is identically zero.
class IntegratorAgent : public Agent {
 public:
  double derivative(double, double u) const override { return u; }
  double output(double x) const override { return x; }
  double steady_state_input(double) const override { return 0.0; }
  double steady_state_output(double sigma) const override { return sigma; }
  std::optional<std::function<double(double)>> closed_form_inverse() const override;
  std::optional<std::function<double(double)>> closed_form_inverse_derivative()
      const override;
  bool flat_inverse_relation() const override { return true; }
  std::string family() const override { return "integrator"; }
};

// Output feedback u_inner = u_ext - nu * y around a passivity-short agent.
// Requires nu greater than the declared shortage.
class PassivationWrapper : public Agent {
 public:
  PassivationWrapper(std::shared_ptr<const Agent> inner, double nu,
                     double declared_shortage);

  double derivative(double x, double u) const override;
  double output(double x) const override { return inner_->output(x); }
  double steady_state_input(double sigma) const override;
  double steady_state_output(double sigma) const override;
  std::string family() const override { return "passivated"; }

  double feedback_gain() const { return nu_; }
  double declared_shortage() const { return shortage_; }
  const Agent& inner() const { return *inner_; }

 private:
  std::shared_ptr<const Agent> inner_;
  double nu_;
  double shortage_;
};

PassivationWrapper passivize(std::shared_ptr<const Agent> agent, double shortage,
                             double margin);

// Numerical MEIP certificate for a control-affine agent, on a sampled domain.
// Checks g > 0, (f - w)/g nondecreasing, h strictly increasing, and a
// divergence proxy: |steady input| or |output| at both domain endpoints must
// reach `divergence_threshold`. A pass certifies the sampled domain only.
struct MeipVerdict {
  bool passed = false;
  std::string reason;                 // empty when passed
  bool input_map_diverges = false;    // |(f - w)/g| >= threshold at both ends
  bool output_map_diverges = false;   // |h| >= threshold at both ends
};

struct MeipCheckOptions {
  Interval domain{-50.0, 50.0};
  int grid = 2001;
  double divergence_threshold = 1e3;
  double strictness_tol = 1e-12;  // minimum increase required of h
};

MeipVerdict check_meip_control_affine(const ControlAffineAgent& agent,
                                      const MeipCheckOptions& opts = {});

// Edge controller. Static controllers are memoryless maps of the relative
// output; the integrator controller carries one state per edge.
class EdgeController {
 public:
  virtual ~EdgeController() = default;
  virtual bool dynamic() const { return false; }
  virtual double output(double zeta, double eta) const = 0;
  virtual double state_derivative(double /*zeta*/, double /*eta*/) const { return 0.0; }
  virtual std::string family() const = 0;
};

// mu = psi(zeta) with psi strictly increasing and psi(root) = 0. The potential
// is the convex integral of psi anchored at the root.
class StaticController : public EdgeController {
 public:
  virtual double map(double zeta) const = 0;
  virtual double map_derivative(double zeta) const;
  virtual double potential(double zeta) const;
  virtual double root() const = 0;

  double output(double zeta, double) const override { return map(zeta); }
};

// mu = zeta - zeta_star.
class ProportionalController final : public StaticController {
 public:
  explicit ProportionalController(double zeta_star) : zeta_star_(zeta_star) {}

  double map(double zeta) const override { return zeta - zeta_star_; }
  double map_derivative(double) const override { return 1.0; }
  double potential(double zeta) const override {
    double d = zeta - zeta_star_;
    return 0.5 * d * d;
  }
  double root() const override { return zeta_star_; }
  std::string family() const override { return "proportional"; }

 private:
  double zeta_star_;
};

// Arbitrary strictly increasing map given as a callable; potential by
// quadrature unless a closed form is supplied.
class CustomStaticController final : public StaticController {
 public:
  CustomStaticController(std::function<double(double)> psi, double root,
                         std::function<double(double)> psi_derivative = nullptr,
                         std::function<double(double)> potential = nullptr);

  double map(double zeta) const override { return psi_(zeta); }
  double map_derivative(double zeta) const override;
  double potential(double zeta) const override;
  double root() const override { return root_; }
  std::string family() const override { return "custom_static"; }

 private:
  std::function<double(double)> psi_;
  double root_;
  std::function<double(double)> dpsi_;
  std::function<double(double)> pot_;
};

// eta' = zeta, mu = eta.
class IntegratorController final : public EdgeController {
 public:
  bool dynamic() const override { return true; }
  double output(double, double eta) const override { return eta; }
  double state_derivative(double zeta, double) const override { return zeta; }
  std::string family() const override { return "integrator"; }
};

}  // namespace formnet

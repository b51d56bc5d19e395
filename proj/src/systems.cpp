#include "formnet/systems.hpp"

#include <cmath>

#include "formnet/numeric.hpp"

namespace formnet {

ControlAffineAgent::ControlAffineAgent(std::function<double(double)> f,
                                       std::function<double(double)> g,
                                       std::function<double(double)> h, double w)
    : f_(std::move(f)), g_(std::move(g)), h_(std::move(h)), w_(w) {
  require(static_cast<bool>(f_) && static_cast<bool>(g_) && static_cast<bool>(h_),
          "systems.invalid", "control-affine agent needs f, g and h");
}

double ControlAffineAgent::derivative(double x, double u) const {
  return -f_(x) + g_(x) * u + w_;
}

double ControlAffineAgent::steady_state_input(double sigma) const {
  return (f_(sigma) - w_) / g_(sigma);
}

VehicleAgent::VehicleAgent(double drag_coefficient, double exogenous_force)
    : ControlAffineAgent([drag_coefficient](double x) { return drag_coefficient * std::abs(x) * x; },
                         [](double) { return 1.0; }, [](double x) { return x; },
                         exogenous_force),
      cd_(drag_coefficient) {
  require(drag_coefficient > 0.0, "systems.invalid", "drag coefficient must be positive");
}

std::optional<std::function<double(double)>> VehicleAgent::closed_form_inverse() const {
  double c = cd_, w = exogenous_offset();
  return [c, w](double y) { return c * std::abs(y) * y - w; };
}

std::optional<std::function<double(double)>> VehicleAgent::closed_form_inverse_derivative()
    const {
  double c = cd_;
  return [c](double y) { return 2.0 * c * std::abs(y); };
}

LtiFirstOrderAgent::LtiFirstOrderAgent(double slope) : slope_(slope) {
  require(slope > 0.0, "systems.invalid", "LTI steady-state slope must be positive");
}

std::optional<std::function<double(double)>> LtiFirstOrderAgent::closed_form_inverse()
    const {
  double s = slope_;
  return [s](double y) { return s * y; };
}

std::optional<std::function<double(double)>>
LtiFirstOrderAgent::closed_form_inverse_derivative() const {
  double s = slope_;
  return [s](double) { return s; };
}

std::optional<std::function<double(double)>> IntegratorAgent::closed_form_inverse()
    const {
  return [](double) { return 0.0; };
}

std::optional<std::function<double(double)>>
IntegratorAgent::closed_form_inverse_derivative() const {
  return [](double) { return 0.0; };
}

PassivationWrapper::PassivationWrapper(std::shared_ptr<const Agent> inner, double nu,
                                       double declared_shortage)
    : inner_(std::move(inner)), nu_(nu), shortage_(declared_shortage) {
  require(static_cast<bool>(inner_), "systems.invalid", "wrapper needs an inner agent");
  require(declared_shortage >= 0.0, "systems.invalid",
          "passivity shortage must be nonnegative");
  require(nu > declared_shortage, "systems.invalid",
          "feedback gain must exceed the declared shortage");
}

double PassivationWrapper::derivative(double x, double u) const {
  return inner_->derivative(x, u - nu_ * inner_->output(x));
}

double PassivationWrapper::steady_state_input(double sigma) const {
  return inner_->steady_state_input(sigma) + nu_ * inner_->steady_state_output(sigma);
}

double PassivationWrapper::steady_state_output(double sigma) const {
  return inner_->steady_state_output(sigma);
}

PassivationWrapper passivize(std::shared_ptr<const Agent> agent, double shortage,
                             double margin) {
  require(margin > 0.0, "systems.invalid", "passivation margin must be positive");
  return PassivationWrapper(std::move(agent), shortage + margin, shortage);
}

MeipVerdict check_meip_control_affine(const ControlAffineAgent& agent,
                                      const MeipCheckOptions& opts) {
  MeipVerdict v;
  require(opts.grid >= 2, "systems.invalid", "MEIP check needs at least 2 grid points");
  require(std::isfinite(opts.domain.lo) && std::isfinite(opts.domain.hi) &&
              opts.domain.width() > 0.0,
          "systems.invalid", "MEIP check needs a finite nonempty domain");

  const int n = opts.grid;
  std::vector<double> q(n), h(n);
  for (int i = 0; i < n; ++i) {
    double x = opts.domain.lo + opts.domain.width() * i / (n - 1);
    double gx = agent.g(x);
    if (!std::isfinite(gx) || gx <= 0.0) {
      v.reason = "non-positive or non-finite g at x=" + std::to_string(x);
      return v;
    }
    q[i] = (agent.f(x) - agent.exogenous_offset()) / gx;
    h[i] = agent.h(x);
    if (!std::isfinite(q[i]) || !std::isfinite(h[i])) {
      v.reason = "non-finite";
      return v;
    }
  }
  for (int i = 1; i < n; ++i) {
    if (q[i] < q[i - 1] - 1e-12) {
      v.reason = "f/g not ascending";
      return v;
    }
    if (h[i] <= h[i - 1] + opts.strictness_tol) {
      v.reason = "h not ascending";
      return v;
    }
  }
  v.input_map_diverges = std::min(std::abs(q.front()), std::abs(q.back())) >=
                         opts.divergence_threshold;
  v.output_map_diverges = std::min(std::abs(h.front()), std::abs(h.back())) >=
                          opts.divergence_threshold;
  if (!v.input_map_diverges && !v.output_map_diverges) {
    v.reason = "divergence proxy not met at domain endpoints";
    return v;
  }
  v.passed = true;
  return v;
}

double StaticController::map_derivative(double zeta) const {
  return central_difference([this](double z) { return map(z); }, zeta);
}

double StaticController::potential(double zeta) const {
  return adaptive_simpson([this](double z) { return map(z); }, root(), zeta, 1e-10);
}

CustomStaticController::CustomStaticController(std::function<double(double)> psi,
                                               double root,
                                               std::function<double(double)> psi_derivative,
                                               std::function<double(double)> potential)
    : psi_(std::move(psi)),
      root_(root),
      dpsi_(std::move(psi_derivative)),
      pot_(std::move(potential)) {
  require(static_cast<bool>(psi_), "systems.invalid", "static controller needs a map");
  require(std::abs(psi_(root_)) < 1e-9, "systems.invalid",
          "controller map must vanish at its root");
}

double CustomStaticController::map_derivative(double zeta) const {
  if (dpsi_) return dpsi_(zeta);
  return StaticController::map_derivative(zeta);
}

double CustomStaticController::potential(double zeta) const {
  if (pot_) return pot_(zeta);
  return StaticController::potential(zeta);
}

}  // namespace formnet

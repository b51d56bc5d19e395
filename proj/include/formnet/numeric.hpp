#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include "formnet/error.hpp"

namespace formnet {

// Central difference with a relative step, the default derivative fallback
// when no closed form is available.
inline double central_difference(const std::function<double(double)>& f, double x,
                                 double rel_step = 1e-5) {
  double h = rel_step * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

namespace detail {
inline double simpson_cell(const std::function<double(double)>& f, double a, double fa,
                           double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a,
                                   double b, double fa, double fb, double fm,
                                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson_cell(f, a, fa, m, fm, flm);
  double right = simpson_cell(f, m, fm, b, fb, frm);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, fa, fm, flm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, fm, fb, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

// Signed integral of f from a to b (a > b gives the negated integral).
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double tol = 1e-10, int max_depth = 40) {
  if (a == b) return 0.0;
  double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  double whole = detail::simpson_cell(f, a, fa, b, fb, fm);
  return detail::adaptive_simpson_rec(f, a, b, fa, fb, fm, whole, tol, max_depth);
}

// Maximizer of a unimodal function on [lo, hi] by golden-section search.
inline double golden_section_max(const std::function<double(double)>& f, double lo,
                                 double hi, double tol = 1e-11) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// Root of a nondecreasing function on [lo, hi] by bisection; assumes a sign
// change (or zero) over the bracket.
inline double monotone_bisect(const std::function<double(double)>& f, double lo,
                              double hi, int iters = 200) {
  double flo = f(lo), fhi = f(hi);
  require(flo <= 0.0 && fhi >= 0.0, "numeric.bracket",
          "bisection bracket does not straddle zero");
  for (int i = 0; i < iters; ++i) {
    double mid = 0.5 * (lo + hi);
    if (f(mid) <= 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Deterministic seeded generator. The engine is std::mt19937_64, which the
// standard pins bit-exactly; doubles are built from the top 53 bits so draws
// do not depend on the library's distribution implementations. The algorithm
// name is recorded in output file headers.
class Rng {
 public:
  static constexpr const char* kName = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace formnet

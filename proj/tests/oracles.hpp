#pragma once

// Test-side oracles, kept independent of the library's numerics on purpose:
// plain composite Simpson quadrature and a least-squares slope fit.

#include <cmath>
#include <functional>
#include <vector>

namespace oracles {

// Composite Simpson with a fixed fine grid; accuracy well below 1e-8 for the
// smooth integrands used in tests.
inline double integral(const std::function<double(double)>& f, double a, double b,
                       int cells = 20000) {
  double h = (b - a) / cells;
  double sum = f(a) + f(b);
  for (int i = 1; i < cells; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return sum * h / 3.0;
}

// Slope of the least-squares line through (x_i, y_i).
inline double fitted_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace oracles

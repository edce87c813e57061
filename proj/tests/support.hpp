#pragma once

#include <cmath>
#include <functional>

#include "etas/simulate.hpp"

namespace etas::testing {

// Parameters of the simulate-then-fit check: 5x5 degree region, ten years.
inline SimConfig reference_config(std::uint64_t seed, double T = 3650.0) {
  SimConfig c;
  c.params = {0.3, 0.15, 1.2, 0.01, 1.3, 0.005, 1.0, 1.8};
  c.magnitude = ExponentialMagnitude{2.3};
  c.region = {0.0, 5.0, 0.0, 5.0};
  c.T = T;
  c.m0 = 5.0;
  c.seed = seed;
  return c;
}

// Composite Gauss-Legendre (5 points) over [a, b] with n panels.
inline double integrate(const std::function<double(double)>& f, double a, double b, int n = 2000) {
  static const double x[5] = {0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                              0.9061798459386640};
  static const double w[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                              0.2369268850561891, 0.2369268850561891};
  const double h = (b - a) / n;
  double s = 0.0;
  for (int k = 0; k < n; ++k) {
    const double mid = a + (k + 0.5) * h;
    for (int i = 0; i < 5; ++i) s += w[i] * f(mid + 0.5 * h * x[i]);
  }
  return 0.5 * h * s;
}

}  // namespace etas::testing

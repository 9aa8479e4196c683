#pragma once

// Independent reference computations shared by the unit tests.

#include <cmath>
#include <functional>

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b) {
  const double m = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

inline double adaptive_simpson_rec(const std::function<double(double)>& f, double a, double b,
                                   double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double left = simpson(f, a, m), right = simpson(f, m, b);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson_rec(f, a, m, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_rec(f, m, b, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
  return adaptive_simpson_rec(f, a, b, simpson(f, a, b), tol, 40);
}

// sqrt(2 W) written directly from W = (1 - s^2)^2 / 2.
inline double sqrt_2w(double s) {
  const double w = 0.5 * (1.0 - s * s) * (1.0 - s * s);
  return std::sqrt(2.0 * w);
}

inline double psi(double s) {
  return integrate(sqrt_2w, -1.0, s);
}

}  // namespace oracle

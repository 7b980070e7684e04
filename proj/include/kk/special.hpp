#pragma once

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>

namespace kk {

/// e^{-x} I_nu(x) for integer nu >= 0, x >= 0, without overflow.
inline double bessel_i_scaled(int nu, double x) {
  if (x < 600.0) return boost::math::cyl_bessel_i(nu, x) * std::exp(-x);
  const double mu = 4.0 * nu * nu;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 12; ++k) {
    double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    sum += term;
    if (std::abs(term) < 1e-17) break;
  }
  return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

/// int_0^inf (1 - cos u) u^{-1-alpha} du for alpha in (0, 2).
inline double one_minus_cos_moment(double alpha) {
  if (std::abs(alpha - 1.0) < 1e-9) return 0.5 * std::numbers::pi;
  return std::tgamma(1.0 - alpha) * std::cos(0.5 * std::numbers::pi * alpha) / alpha;
}

/// Quintic smootherstep: 0 for t <= 0, 1 for t >= 1, C^2 in between.
inline double smootherstep(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (t * (6.0 * t - 15.0) + 10.0);
}

/// C-infinity transition: 0 for u <= 0, 1 for u >= 1.
inline double smooth_transition(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  double a = std::exp(-1.0 / u), b = std::exp(-1.0 / (1.0 - u));
  return a / (a + b);
}

}  // namespace kk

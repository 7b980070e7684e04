#pragma once

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include "params.hpp"

namespace kk {

struct Rule {
  std::vector<double> x;
  std::vector<double> w;
};

namespace detail {
inline Rule compute_gauss_legendre(int n) {
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    r.x[i] = -z;
    r.x[n - 1 - i] = z;
    r.w[i] = r.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
  return r;
}
}  // namespace detail

/// Gauss-Legendre rule on [-1,1], cached per order.
inline const Rule& gauss_legendre(int n) {
  static std::map<int, Rule> cache;
  static std::mutex m;
  std::lock_guard<std::mutex> lock(m);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, detail::compute_gauss_legendre(n)).first;
  return it->second;
}

/// Gauss-Legendre rule mapped to [a,b].
inline Rule gauss_legendre(int n, double a, double b) {
  const Rule& g = gauss_legendre(n);
  Rule r;
  r.x.resize(n);
  r.w.resize(n);
  double h = 0.5 * (b - a), c = 0.5 * (a + b);
  for (int i = 0; i < n; ++i) {
    r.x[i] = c + h * g.x[i];
    r.w[i] = h * g.w[i];
  }
  return r;
}

/// Composite Gauss-Legendre over consecutive breakpoints.
inline Rule composite_rule(const std::vector<double>& breaks, int n) {
  Rule r;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    if (breaks[k + 1] <= breaks[k]) continue;
    Rule p = gauss_legendre(n, breaks[k], breaks[k + 1]);
    r.x.insert(r.x.end(), p.x.begin(), p.x.end());
    r.w.insert(r.w.end(), p.w.begin(), p.w.end());
  }
  return r;
}

/// Geometric panels on (0,b]: [b q^{k+1}, b q^k], k < levels, for integrands with power behaviour at 0.
inline Rule graded_rule(double b, int levels, int n, double q = 0.5) {
  std::vector<double> br;
  double a = b;
  for (int k = 0; k < levels; ++k) a *= q;
  br.push_back(a);
  double x = a;
  for (int k = 0; k < levels; ++k) {
    x /= q;
    br.push_back(k + 1 == levels ? b : x);
  }
  return composite_rule(br, n);
}

/// Gauss rule on [0, R] for the weight r^alpha (alpha > -1), by Golub-Welsch on the shifted Jacobi recurrence.
inline Rule gauss_jacobi_power(int n, double alpha, double R) {
  if (!(alpha > -1.0)) throw ValidationError("gauss_jacobi_power: alpha must exceed -1");
  // Jacobi (a, b) = (0, alpha) on [-1, 1] with weight (1 + t)^alpha
  const double a = 0.0, b = alpha;
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double s = 2.0 * k + a + b;
    J(k, k) = k == 0 ? (b - a) / (a + b + 2.0) : (b * b - a * a) / (s * (s + 2.0));
    if (k + 1 < n) {
      double k1 = k + 1.0, s1 = 2.0 * k1 + a + b;
      double beta = 4.0 * k1 * (k1 + a) * (k1 + b) * (k1 + a + b) / (s1 * s1 * (s1 + 1.0) * (s1 - 1.0));
      J(k, k + 1) = J(k + 1, k) = std::sqrt(beta);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const double mu0 = std::pow(2.0, a + b + 1.0) * std::tgamma(a + 1.0) * std::tgamma(b + 1.0) / std::tgamma(a + b + 2.0);
  Rule r;
  const double scale = std::pow(0.5 * R, alpha + 1.0);  // (1+t)^alpha dt -> (2r/R)^alpha (2/R) dr
  for (int i = 0; i < n; ++i) {
    double t = es.eigenvalues()(i);
    double v0 = es.eigenvectors()(0, i);
    r.x.push_back(0.5 * R * (1.0 + t));
    r.w.push_back(mu0 * v0 * v0 * scale);
  }
  return r;
}

/// Uniform periodic trapezoid nodes on [0, 2pi).
inline Rule circle_rule(int n) {
  Rule r;
  r.x.resize(n);
  r.w.assign(n, 2.0 * std::numbers::pi / n);
  for (int i = 0; i < n; ++i) r.x[i] = 2.0 * std::numbers::pi * i / n;
  return r;
}

template <class F>
double integrate_gk(F&& f, double a, double b, double tol, double* err = nullptr) {
  double e = 0.0;
  double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, tol, &e);
  if (err) *err = e;
  return v;
}

/// Tanh-sinh on [a,b]; tolerates integrable endpoint singularities.
template <class F>
double integrate_ts(F&& f, double a, double b, double tol, double* err = nullptr) {
  static thread_local boost::math::quadrature::tanh_sinh<double> ts(12);
  double e = 0.0, l1 = 0.0;
  double v = ts.integrate(f, a, b, tol, &e, &l1);
  if (err) *err = e;
  return v;
}

/// Pairwise summation for order-independent, accurate reductions.
inline double pairwise_sum(const double* x, std::size_t n) {
  if (n <= 16) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
  }
  std::size_t h = n / 2;
  return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}
inline double pairwise_sum(const std::vector<double>& x) { return pairwise_sum(x.data(), x.size()); }

inline double sphere_area(int d) {
  // |S^{d-1}| = 2 pi^{d/2} / Gamma(d/2)
  return 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
}

}  // namespace kk

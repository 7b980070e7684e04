#pragma once

#include <algorithm>
#include <array>
#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <vector>

#include "geometry.hpp"
#include "params.hpp"
#include "quadrature.hpp"
#include "special.hpp"

namespace kk {

inline double maxwellian(const Vec& v) {
  const int d = static_cast<int>(v.size());
  return std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::exp(-0.5 * v.squaredNorm());
}

/// Canonical angular profile b(r) = (1-r)^{-(d-1+2s)/2} chi_tilde(r) and the induced A(rho).
struct AngularProfile {
  ModelParams p;

  explicit AngularProfile(const ModelParams& m) : p(m) {}

  /// smooth, equal to 1 on [1/2, 1], supported in [0, 1]
  static double chi_tilde(double r) {
    if (r < 0.0 || r > 1.0) return 0.0;
    return smooth_transition(2.0 * r);
  }
  double b(double r) const {
    if (r < 0.0 || r >= 1.0) return 0.0;
    return std::pow(1.0 - r, -0.5 * (p.d - 1 + 2.0 * p.s)) * chi_tilde(r);
  }
  /// A(rho) = (1+rho)^{(gamma+2-d)/2} b((1-rho)/(1+rho)) rho^{(d-1+2s)/2}, in closed form
  double A(double rho) const {
    if (rho < 0.0 || rho > 1.0) return 0.0;
    return std::pow(2.0, -0.5 * (p.d - 1 + 2.0 * p.s)) * std::pow(1.0 + rho, 0.5 * (p.gamma + 1.0 + 2.0 * p.s)) *
           chi_tilde((1.0 - rho) / (1.0 + rho));
  }
  /// literal definition, for cross-checking the closed form
  double A_literal(double rho) const {
    if (rho <= 0.0 || rho > 1.0) return rho == 0.0 ? A(0.0) : 0.0;
    return std::pow(1.0 + rho, 0.5 * (p.gamma + 2.0 - p.d)) * b((1.0 - rho) / (1.0 + rho)) *
           std::pow(rho, 0.5 * (p.d - 1 + 2.0 * p.s));
  }
  /// radial cutoff: 1 on |z| <= 1, 0 on |z| >= 2
  double chi(double z) const { return 1.0 - smootherstep((z - p.chi_inner) / (p.chi_outer - p.chi_inner)); }

  /// sandwich constants of (1-r)^{(d-1+2s)/2} b(r) against 1_{[1-delta0,1]} and 1_{[-1,1]}
  double b_lower() const { return chi_tilde(1.0 - p.delta0); }
  double b_upper() const { return 1.0; }
  double rho_delta() const { return p.delta0 / (2.0 - p.delta0); }
};

/// Uniform-grid cubic B-spline of log(y) against u; y must be positive.
class LogSpline {
 public:
  LogSpline() = default;
  LogSpline(const std::vector<double>& y, double u0, double h) : u0_(u0), h_(h), n_(y.size()) {
    std::vector<double> ly(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) ly[i] = std::log(y[i]);
    sp_ = std::make_shared<boost::math::interpolators::cardinal_cubic_b_spline<double>>(ly.data(), ly.size(), u0, h);
  }
  double operator()(double u) const { return std::exp((*sp_)(u)); }
  double u_min() const { return u0_; }
  double u_max() const { return u0_ + h_ * (n_ - 1); }
  bool empty() const { return !sp_; }

 private:
  double u0_ = 0.0, h_ = 1.0;
  std::size_t n_ = 0;
  std::shared_ptr<boost::math::interpolators::cardinal_cubic_b_spline<double>> sp_;
};

/// Angular coefficients, Landau matrix and Fourier symbol for one model configuration.
class SymbolTable;

class Multiplier {
 public:
  Multiplier(const ModelParams& p, const QuadratureSpec& q = {}) : p_(p), q_(q), prof_(p) { p_.validate(); }

  const ModelParams& params() const { return p_; }
  const QuadratureSpec& quad() const { return q_; }
  const AngularProfile& profile() const { return prof_; }
  double kappa() const { return p_.kappa(); }

  // ---------------------------------------------------------------- angular coefficient

  /// c'_d of the reduced profile; derived from 2^{d-1} A(0) and the Maxwellian normalization
  double c_prime() const {
    const int d = p_.d;
    double sd3 = 2.0 * std::pow(std::numbers::pi, 0.5 * (d - 2)) / std::tgamma(0.5 * (d - 2));
    return std::pow(2.0, d - 1) * prof_.A(0.0) * std::pow(2.0 * std::numbers::pi, -0.5 * d) * sd3;
  }

  /// Gamma-function closed form of frak_c(0)
  double frak_c0_closed() const {
    const int d = p_.d;
    const double k = kappa();
    return c_prime() * std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (d - 2)) / std::tgamma(0.5 * (d - 1)) *
           std::pow(2.0, 0.5 * (d - k - 2)) * std::tgamma(0.5 * (d - k));
  }

  /// frak_c(a) by direct quadrature of the reduced (r, tau) integral; d = 3 only
  double frak_c_direct(double a) const {
    if (p_.d != 3) throw ValidationError("frak_c: the reduced profile requires d >= 3; use angular_coefficient for d = 2");
    const double k = kappa();
    // (1-tau^2)^{-1/2} dtau = dphi, and int_0^pi e^{-ra cos phi} dphi = pi I_0(ra)
    auto g = [&](double r) {
      if (r <= 0.0) return 0.0;
      return std::pow(r, 2.0 - k) * std::exp(-0.5 * (r - a) * (r - a)) * std::numbers::pi * bessel_i_scaled(0, r * a);
    };
    double tol = q_.rel_tol;
    double v = 0.0;
    if (a > 0.0) v += integrate_ts(g, 0.0, a, tol) + integrate_gk(g, a, a + 40.0, tol);
    else v += integrate_ts(g, 0.0, 40.0, tol);
    return c_prime() * v;
  }

  /// frak_c from the cached table (log-spaced in a)
  double frak_c(double a) const {
    if (p_.d != 3) throw ValidationError("frak_c: the reduced profile requires d >= 3; use angular_coefficient for d = 2");
    return profile_value(a);
  }

  /// Reduced hyperplane profile: C_mu(v, theta) = exp(-(v.theta)^2/2) * profile(|Pi_theta v|). Direct quadrature.
  double profile_direct(double a) const {
    if (p_.d == 3) return frak_c_direct(a);
    const double k = kappa();
    auto g = [&](double t) {
      if (t <= 0.0) return 0.0;
      return std::pow(t, 1.0 - k) * (std::exp(-0.5 * (t + a) * (t + a)) + std::exp(-0.5 * (t - a) * (t - a)));
    };
    double tol = q_.rel_tol, v = 0.0;
    if (a > 0.0) v = integrate_ts(g, 0.0, a, tol) + integrate_gk(g, a, a + 40.0, tol);
    else v = integrate_ts(g, 0.0, 40.0, tol);
    return 2.0 * prof_.A(0.0) / (2.0 * std::numbers::pi) * v;
  }

  /// Cached reduced profile (cubic spline of log value against log(1+a^2)).
  double profile_value(double a) const {
    std::call_once(profile_once_, [&] { build_profile_table(); });
    double u = std::log1p(a * a);
    if (u <= profile_tab_.u_max()) return profile_tab_(u);
    return profile_direct(a);
  }

  /// angular coefficient by direct quadrature over the hyperplane orthogonal to theta
  double angular_coefficient(const Vec& v0, const Vec& theta) const {
    const int d = p_.d;
    const double k = kappa();
    const double pre = std::pow(2.0, d - 1) * prof_.A(0.0);
    double tol = q_.rel_tol;
    if (d == 2) {
      Vec e(2);
      e << -theta(1), theta(0);
      auto g = [&](double t) {
        Vec w = v0 + t * e;
        return std::pow(std::abs(t), 1.0 - k) * maxwellian(w);
      };
      double c = -v0.dot(e);  // maximizer of the Gaussian along the line
      std::vector<double> br{std::min(0.0, c) - 40.0, std::min(0.0, c), std::max(0.0, c), std::max(0.0, c) + 40.0};
      double v = 0.0;
      for (std::size_t i = 0; i + 1 < br.size(); ++i)
        if (br[i + 1] > br[i]) v += integrate_ts(g, br[i], br[i + 1], tol);
      return pre * v;
    }
    // d = 3: polar coordinates (t, phi) in theta-perp
    Vec e1 = any_orthogonal(theta);
    Vec e2(3);
    e2 << theta(1) * e1(2) - theta(2) * e1(1), theta(2) * e1(0) - theta(0) * e1(2), theta(0) * e1(1) - theta(1) * e1(0);
    auto radial = [&](double t) {
      if (t <= 0.0) return 0.0;
      auto ang = [&](double phi) { return maxwellian(v0 + t * (std::cos(phi) * e1 + std::sin(phi) * e2)); };
      return std::pow(t, 2.0 - k) * integrate_gk(ang, 0.0, 2.0 * std::numbers::pi, tol);
    };
    double a = (v0 - v0.dot(theta) * theta).norm();
    double v = a > 0 ? integrate_ts(radial, 0.0, a, tol) + integrate_gk(radial, a, a + 40.0, tol)
                     : integrate_ts(radial, 0.0, 40.0, tol);
    return pre * v;
  }

  /// factorized angular coefficient from the cached profile
  double angular_coefficient_fast(const Vec& v0, const Vec& theta) const {
    double c = v0.dot(theta);
    double a = std::sqrt(std::max(0.0, v0.squaredNorm() - c * c));
    return std::exp(-0.5 * c * c) * profile_value(a);
  }

  // ---------------------------------------------------------------- Landau matrix

  /// eigenvalues (c1 transverse, c2 along v0) of a * mu at v0 = r e_d, by literal convolution
  std::pair<double, double> landau_eigen_direct(double r) const {
    const int d = p_.d;
    const double g = p_.gamma;
    const double tol = q_.rel_tol;
    const double norm = std::pow(2.0 * std::numbers::pi, -0.5 * d);
    // angular integrals of the transverse / longitudinal projections against e^{-r rho (1 - cos psi)}
    auto inner = [&](double rho, bool along) {
      double x = r * rho;
      if (d == 2) {
        auto f = [&](double psi) {
          double c = std::cos(psi), sn = std::sin(psi);
          return (along ? sn * sn : c * c) * std::exp(-x * (1.0 - c));
        };
        double brk = x > 1.0 ? std::min(std::numbers::pi, 8.0 / std::sqrt(x)) : std::numbers::pi;
        double v = integrate_gk(f, 0.0, brk, tol);
        if (brk < std::numbers::pi) v += integrate_gk(f, brk, std::numbers::pi, tol);
        return 2.0 * v;
      }
      // d = 3, u = 1 - cos psi
      auto f = [&](double u) {
        double s2 = u * (2.0 - u);
        return (along ? s2 : 1.0 - 0.5 * s2) * std::exp(-x * u);
      };
      double brk = x > 1.0 ? std::min(2.0, 40.0 / x) : 2.0;
      double v = integrate_gk(f, 0.0, brk, tol);
      if (brk < 2.0) v += integrate_gk(f, brk, 2.0, tol);
      return 2.0 * std::numbers::pi * v;
    };
    auto radial = [&](double rho, bool along) {
      if (rho <= 0.0) return 0.0;
      return std::pow(rho, g + d + 1.0) * std::exp(-0.5 * (r - rho) * (r - rho)) * inner(rho, along);
    };
    auto total = [&](bool along) {
      auto f = [&](double rho) { return radial(rho, along); };
      double v = 0.0;
      if (r > 0.5) v = integrate_ts(f, 0.0, r, tol) + integrate_gk(f, r, r + 40.0, tol);
      else v = integrate_ts(f, 0.0, 40.0, tol);
      return norm * v;
    };
    return {total(false), total(true)};
  }

  std::pair<double, double> landau_eigen(double r) const {
    if (p_.s != 1.0) throw ValidationError("landau_matrix: requires the Landau branch s = 1");
    std::call_once(landau_once_, [&] { build_landau_table(); });
    double u = std::log1p(r * r);
    if (u <= landau_c1_.u_max()) return {landau_c1_(u), landau_c2_(u)};
    return landau_eigen_direct(r);
  }

  /// closed form of a * mu(0) = c Id
  double landau_isotropic_closed() const {
    const int d = p_.d;
    const double g = p_.gamma;
    return (d - 1.0) / d * sphere_area(d) * std::pow(2.0 * std::numbers::pi, -0.5 * d) * std::pow(2.0, 0.5 * (g + d)) *
           std::tgamma(0.5 * (g + d + 2.0));
  }

  Mat landau_matrix(const Vec& v0) const {
    AnisotropicFrame f = make_frame(v0);
    auto [c1, c2] = landau_eigen(f.r());
    const int d = p_.d;
    Mat D = Mat::Identity(d, d) * c1;
    D(d - 1, d - 1) = c2;
    return f.Q * D * f.Q.transpose();
  }

  // ---------------------------------------------------------------- Fourier symbol

  /// R(a) = int_0^2 (1 - cos(rho a)) chi(rho) rho^{-1-2s} d rho, by direct quadrature
  double radial_R_direct(double a) const {
    a = std::abs(a);
    const double al = 2.0 * p_.s;
    if (a == 0.0) return 0.0;
    if (a < 1e-3) {
      double m2 = moment(2), m4 = moment(4), m6 = moment(6);
      double a2 = a * a;
      return a2 / 2.0 * m2 - a2 * a2 / 24.0 * m4 + a2 * a2 * a2 / 720.0 * m6;
    }
    if (a > kRTableMax) return one_minus_cos_moment(al) * std::pow(a, al) - tail_K0();
    auto f = [&](double r) {
      if (r <= 0.0) return 0.0;
      double q = std::sin(0.5 * r * a) / r;
      return 2.0 * q * q * prof_.chi(r) * std::pow(r, 1.0 - al);
    };
    double b1 = std::min(1.0, std::numbers::pi / a);
    double v = integrate_ts(f, 0.0, b1, 1e-14);
    std::vector<double> br;
    double h = std::numbers::pi / a;
    br.push_back(b1);
    for (double x = b1 + h; x < 2.0; x += h) {
      if (br.back() < 1.0 && x > 1.0) br.push_back(1.0);
      br.push_back(x);
    }
    if (br.back() < 1.0) br.push_back(1.0);
    br.push_back(2.0);
    std::sort(br.begin(), br.end());
    Rule rl = composite_rule(br, 12);
    for (std::size_t i = 0; i < rl.x.size(); ++i) v += rl.w[i] * f(rl.x[i]);
    return v;
  }

  double radial_R(double a) const {
    a = std::abs(a);
    if (a == 0.0) return 0.0;
    if (a < 1e-3 || a > kRTableMax) return radial_R_direct(a);
    std::call_once(r_once_, [&] { build_r_table(); });
    return r_tab_(std::log(a));
  }

  /// E^s(z, v0) by direct quadrature (Landau branch: (a*mu(v0) z, z))
  double symbol(const Vec& z, const Vec& v0) const {
    if (z.squaredNorm() == 0.0) return 0.0;
    if (p_.s == 1.0) {
      Mat A = landau_matrix(v0);
      return z.dot(A * z);
    }
    AnisotropicFrame f = make_frame(v0);
    Vec zf = f.to_frame(z);
    double zn = zf.norm();
    double c = std::abs(zf(p_.d - 1)) / zn;
    return symbol_frame(zn, std::min(1.0, c), f.r());
  }

  /// symbol in the frame v0 = r e_d as a function of |z| and |cos(angle(z, e_d))|
  double symbol_frame(double zn, double c, double r) const {
    if (zn == 0.0) return 0.0;
    const double tol = 1e-11;
    if (p_.s == 1.0) {
      auto [c1, c2] = landau_eigen(r);
      return zn * zn * (c1 * (1.0 - c * c) + c2 * c * c);
    }
    const double sn = std::sqrt(std::max(0.0, 1.0 - c * c));
    if (p_.d == 2) {
      // z = zn (sn, c), theta = (cos phi, sin phi)
      auto f = [&](double phi) {
        double cp = std::cos(phi), sp = std::sin(phi);
        double w = std::exp(-0.5 * r * r * sp * sp) * profile_value(r * std::abs(cp));
        return radial_R(zn * (sn * cp + c * sp)) * w;
      };
      // integrand is pi-periodic; break at the zero of z.theta and at the peaks of the weight
      double phz = std::atan2(c, sn);  // z direction angle
      double b0 = std::fmod(phz + 0.5 * std::numbers::pi, std::numbers::pi);
      std::vector<double> br{0.0, 0.5 * std::numbers::pi, std::numbers::pi, b0};
      if (r > 1.0) {
        double wdt = std::min(0.5, 6.0 / r);
        br.push_back(wdt);
        br.push_back(std::numbers::pi - wdt);
      }
      std::sort(br.begin(), br.end());
      double v = 0.0;
      for (std::size_t i = 0; i + 1 < br.size(); ++i)
        if (br[i + 1] > br[i]) v += integrate_gk(f, br[i], br[i + 1], tol);
      return 2.0 * v;
    }
    // d = 3 via the (s1, s2) reduction with n1 = zhat, n2 = e_d
    auto outer = [&](double s2) {
      double A = sn * std::sqrt(std::max(0.0, 1.0 - s2 * s2)), B = c * s2;
      double w = std::exp(-0.5 * r * r * s2 * s2) * profile_value(r * std::sqrt(std::max(0.0, 1.0 - s2 * s2)));
      auto in = [&](double psi) { return radial_R(zn * (A * std::cos(psi) + B)); };
      double v = 0.0;
      if (A > std::abs(B)) {
        double p0 = std::acos(-B / A);
        v = integrate_gk(in, 0.0, p0, tol) + integrate_gk(in, p0, std::numbers::pi, tol);
      } else {
        v = integrate_gk(in, 0.0, std::numbers::pi, tol);
      }
      return 2.0 * w * v;
    };
    std::vector<double> br{-1.0, 0.0, 1.0};
    if (r > 1.0) {
      double wdt = std::min(0.5, 6.0 / r);
      br = {-1.0, -wdt, 0.0, wdt, 1.0};
    }
    double v = 0.0;
    for (std::size_t i = 0; i + 1 < br.size(); ++i) v += integrate_gk(outer, br[i], br[i + 1], tol);
    return v;
  }

  /// int_0^t E^s(tau xi - eta, v0) d tau
  double integrated_symbol(double t, const Vec& xi, const Vec& eta, const Vec& v0) const {
    if (t <= 0.0) return 0.0;
    if (p_.s == 1.0) {
      Mat A = landau_matrix(v0);
      return t * t * t / 3.0 * xi.dot(A * xi) - t * t * xi.dot(A * eta) + t * eta.dot(A * eta);
    }
    return integrated_symbol_quadrature(t, xi, eta, v0, q_.tau_nodes);
  }

  /// Gauss-Legendre in tau, split at the closest approach of tau xi - eta to the origin
  double integrated_symbol_quadrature(double t, const Vec& xi, const Vec& eta, const Vec& v0, int n) const {
    if (t <= 0.0) return 0.0;
    double xx = xi.squaredNorm();
    double ts = xx > 0 ? std::clamp(xi.dot(eta) / xx, 0.0, t) : 0.0;
    std::vector<double> br{0.0, ts, t};
    Rule rl = composite_rule(br, n);
    double v = 0.0;
    for (std::size_t i = 0; i < rl.x.size(); ++i) v += rl.w[i] * symbol(rl.x[i] * xi - eta, v0);
    return v;
  }

 private:
  static constexpr double kRTableMax = 4000.0;

  double moment(int j) const {
    const double al = 2.0 * p_.s;
    auto f = [&](double r) { return r <= 0 ? 0.0 : std::pow(r, j - 1.0 - al) * prof_.chi(r); };
    return integrate_ts(f, 0.0, 1.0, 1e-14) + integrate_gk(f, 1.0, 2.0, 1e-14);
  }
  double tail_K0() const {
    const double al = 2.0 * p_.s;
    auto f = [&](double r) { return (1.0 - prof_.chi(r)) * std::pow(r, -1.0 - al); };
    return integrate_gk(f, 1.0, 2.0, 1e-14) + std::pow(2.0, -al) / al;
  }

  static Vec any_orthogonal(const Vec& t) {
    Vec a = std::abs(t(0)) < 0.9 ? unit(3, 0) : unit(3, 1);
    Vec e = a - a.dot(t) * t;
    return e / e.norm();
  }

  void build_profile_table() const {
    const double amax = 64.0;
    const int n = 1024;
    double umax = std::log1p(amax * amax), h = umax / (n - 1);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = profile_direct(std::sqrt(std::expm1(i * h)));
    profile_tab_ = LogSpline(y, 0.0, h);
  }
  void build_landau_table() const {
    const double rmax = 64.0;
    const int n = 400;
    double umax = std::log1p(rmax * rmax), h = umax / (n - 1);
    std::vector<double> y1(n), y2(n);
    for (int i = 0; i < n; ++i) {
      auto [c1, c2] = landau_eigen_direct(std::sqrt(std::expm1(i * h)));
      y1[i] = c1;
      y2[i] = c2;
    }
    landau_c1_ = LogSpline(y1, 0.0, h);
    landau_c2_ = LogSpline(y2, 0.0, h);
  }
  void build_r_table() const {
    double u0 = std::log(1e-3), u1 = std::log(kRTableMax);
    const int n = 1600;
    double h = (u1 - u0) / (n - 1);
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = radial_R_direct(std::exp(u0 + i * h) * (i == n - 1 ? 1.0 - 1e-15 : 1.0));
    r_tab_ = LogSpline(y, u0, h);
  }

  ModelParams p_;
  QuadratureSpec q_;
  AngularProfile prof_;
  mutable std::once_flag profile_once_, landau_once_, r_once_;
  mutable LogSpline profile_tab_, landau_c1_, landau_c2_, r_tab_;
  mutable std::mutex table_mu_;
  mutable std::map<long, std::shared_ptr<const SymbolTable>> tables_;

 public:
  /// Shared symbol table for v0 = r e_d covering |z| <= zmax (frame v0 along the last axis).
  std::shared_ptr<const SymbolTable> symbol_table(double r, double zmax) const;
};

/// Sphere integral of F(n1.theta, n2.theta) over S^2 by the reduced (s1, s2) double integral.
inline double sphere_reduce(const std::function<double(double, double)>& F, const Vec& n1, const Vec& n2, int n = 64) {
  if (n1.size() != 3) throw ValidationError("sphere_reduce: the reduced formula is implemented for d = 3");
  const double c = std::clamp(n1.dot(n2), -1.0, 1.0);
  const Rule& g = gauss_legendre(n);
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    // s2 = cos(beta) with GL in beta to absorb the endpoint behaviour
    double beta = 0.5 * std::numbers::pi * (g.x[i] + 1.0);
    double s2 = std::cos(beta), ws2 = 0.5 * std::numbers::pi * g.w[i] * std::sin(beta);
    double inner = 0.0;
    for (int j = 0; j < n; ++j) {
      double psi = 0.5 * std::numbers::pi * (g.x[j] + 1.0);
      double s1 = std::cos(psi);
      double a1 = std::sqrt(std::max(0.0, 1.0 - c * c)) * std::sqrt(std::max(0.0, 1.0 - s2 * s2)) * s1 + c * s2;
      inner += 0.5 * std::numbers::pi * g.w[j] * F(a1, s2);  // (1-s1^2)^{-1/2} ds1 = d psi
    }
    acc += ws2 * inner;
  }
  return 2.0 * acc;  // |S^0| = 2
}


/// Cached evaluations of E^s(., v0), tabulated in (log|z|, angle to v0) in the frame of v0.
class SymbolTable {
 public:
  SymbolTable(const Multiplier& m, const Vec& v0, double zmax, int nu = 0, int nphi = 0)
      : m_(&m), frame_(make_frame(v0)) {
    const ModelParams& p = m.params();
    if (p.s == 1.0) {
      A_ = m.landau_matrix(v0);
      u1_ = 700.0;
      return;
    }
    nu = nu > 0 ? nu : std::max(64, static_cast<int>(16.0 * std::log(std::max(zmax, 2.0) / kZmin)));
    nphi = nphi > 0 ? nphi : 33;
    u0_ = std::log(kZmin);
    u1_ = std::log(std::max(zmax, 2.0));
    nu_ = nu;
    nphi_ = nphi;
    hu_ = (u1_ - u0_) / (nu - 1);
    hphi_ = 0.5 * std::numbers::pi / (nphi - 1);
    logE_.resize(static_cast<std::size_t>(nu) * nphi);
    const double r = frame_.r();
    for (int i = 0; i < nu; ++i)
      for (int j = 0; j < nphi; ++j) {
        double zn = std::exp(u0_ + i * hu_);
        double c = std::cos(j * hphi_);  // angle measured from the v0 axis
        logE_[static_cast<std::size_t>(i) * nphi + j] = std::log(m.symbol_frame(zn, c, r));
      }
  }

  const AnisotropicFrame& frame() const { return frame_; }
  const Vec& v0() const { return frame_.v0; }
  double zmax() const { return std::exp(u1_); }

  double eval(const Vec& z) const { return eval_dir(z, frame_.vhat0); }

  /// Same radial table, but with the v0 direction replaced by the unit vector vhat (|v0| kept).
  double eval_dir(const Vec& z, const Vec& vhat) const {
    if (m_->params().s == 1.0) {
      if (vhat.size() == frame_.vhat0.size() && (vhat - frame_.vhat0).norm() < 1e-14) return z.dot(A_ * z);
      Mat Ar = m_->landau_matrix(frame_.r() * vhat);
      return z.dot(Ar * z);
    }
    double zn = z.norm();
    if (zn == 0.0) return 0.0;
    double c = frame_.r() > 0 ? std::abs(vhat.dot(z)) / zn : 1.0;
    double phi = std::acos(std::min(1.0, c));
    double u = std::log(zn);
    if (u < u0_) return std::exp(lookup(u0_, phi)) * (zn / kZmin) * (zn / kZmin);
    if (u > u1_) return std::exp(lookup(u1_, phi)) * std::pow(zn / std::exp(u1_), 2.0 * m_->params().s);
    return std::exp(lookup(u, phi));
  }

  /// int_0^t E(eta - sigma xi) d sigma with Gauss-Legendre split at the closest approach
  double integrated(double t, const Vec& xi, const Vec& eta, int n) const {
    return integrated_dir(t, xi, eta, n, frame_.vhat0);
  }

  double integrated_dir(double t, const Vec& xi, const Vec& eta, int n, const Vec& vhat) const {
    if (t <= 0.0) return 0.0;
    if (m_->params().s == 1.0) {
      Mat Ar = (vhat - frame_.vhat0).norm() < 1e-14 ? A_ : m_->landau_matrix(frame_.r() * vhat);
      return t * t * t / 3.0 * xi.dot(Ar * xi) - t * t * xi.dot(Ar * eta) + t * eta.dot(Ar * eta);
    }
    double xx = xi.squaredNorm();
    double ts = xx > 0 ? std::clamp(xi.dot(eta) / xx, 0.0, t) : 0.0;
    const Rule& g = gauss_legendre(n);
    double v = 0.0;
    Vec z(xi.size());
    for (int seg = 0; seg < 2; ++seg) {
      double a = seg == 0 ? 0.0 : ts, b = seg == 0 ? ts : t;
      if (b <= a) continue;
      double h = 0.5 * (b - a), c = 0.5 * (a + b);
      for (int i = 0; i < n; ++i) {
        double sg = c + h * g.x[i];
        z = eta - sg * xi;
        v += h * g.w[i] * eval_dir(z, vhat);
      }
    }
    return v;
  }

 private:
  static constexpr double kZmin = 1e-3;

  double node(int i, int j) const {
    // reflect the angle index about 0 and pi/2 (E is even in both)
    if (j < 0) j = -j;
    if (j > nphi_ - 1) j = 2 * (nphi_ - 1) - j;
    i = std::clamp(i, 0, nu_ - 1);
    return logE_[static_cast<std::size_t>(i) * nphi_ + j];
  }

  double lookup(double u, double phi) const {
    double su = (u - u0_) / hu_, sp = phi / hphi_;
    int iu = std::clamp(static_cast<int>(std::floor(su)), 0, nu_ - 2);
    int ip = std::clamp(static_cast<int>(std::floor(sp)), 0, nphi_ - 2);
    auto wu = cubic_weights(su - iu), wp = cubic_weights(sp - ip);
    double acc = 0.0;
    for (int a = 0; a < 4; ++a) {
      int ii = iu + a - 1;
      double row = 0.0;
      // near the u-boundaries fall back to the clamped stencil (linear extrapolation effect is small)
      for (int b = 0; b < 4; ++b) row += wp[b] * node(ii, ip + b - 1);
      acc += wu[a] * row;
    }
    return acc;
  }

  static std::array<double, 4> cubic_weights(double u) {
    return {-u * (u - 1.0) * (u - 2.0) / 6.0, (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
            -(u + 1.0) * u * (u - 2.0) / 2.0, (u + 1.0) * u * (u - 1.0) / 6.0};
  }

  const Multiplier* m_;
  AnisotropicFrame frame_;
  Mat A_;
  double u0_ = 0, u1_ = 0, hu_ = 1, hphi_ = 1;
  int nu_ = 0, nphi_ = 0;
  std::vector<double> logE_;
};

inline std::shared_ptr<const SymbolTable> Multiplier::symbol_table(double r, double zmax) const {
  std::lock_guard<std::mutex> lock(table_mu_);
  long key = std::lround(r * 1e9);
  auto it = tables_.find(key);
  if (it != tables_.end() && it->second->zmax() >= zmax) return it->second;
  double z = zmax;
  if (it != tables_.end()) z = std::max(zmax, 4.0 * it->second->zmax());
  Vec v0 = Vec::Zero(p_.d);
  v0(p_.d - 1) = r;
  auto tab = std::make_shared<const SymbolTable>(*this, v0, z);
  tables_[key] = tab;
  return tab;
}

}  // namespace kk

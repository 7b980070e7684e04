#pragma once

#include <algorithm>
#include <boost/math/special_functions/hypergeometric_1F1.hpp>
#include <cmath>
#include <mutex>
#include <numbers>
#include <vector>

#include "geometry.hpp"
#include "multiplier.hpp"
#include "quadrature.hpp"
#include "vfunction.hpp"

namespace kk {

/// Node counts for the singular collision integrals.
struct CollisionSpec {
  int rho_levels = 12;      // the rho-integral starts at 4^{-levels}; the rest uses the Hessian limit
  int rho_nodes = 14;       // GL nodes per log-panel in rho
  int outer_nodes = 16;     // GL nodes per unit rho-panel away from 0
  int theta_nodes = 32;     // directions on the half circle (d = 2) / polar nodes on the hemisphere (d = 3)
  int line_nodes = 16;      // GL nodes per unit hyperplane panel
  int geo_nodes = 8;        // GL nodes per log-panel of the hyperplane integral near |w| = 0
  double log_ratio = 8.0;   // end-point ratio of the log-panels
  int plane_dirs = 48;      // in-plane directions for d = 3
  double taylor = 1e-3;     // below this rho, second differences use Hessians
  double trunc = 12.0;      // support radius assumed for non-compact fields

  CollisionSpec refined() const {
    CollisionSpec c = *this;
    c.rho_levels += 2;
    c.rho_nodes = rho_nodes * 3 / 2;
    c.outer_nodes = outer_nodes * 3 / 2;
    c.theta_nodes = theta_nodes * 3 / 2;
    c.line_nodes = line_nodes * 3 / 2;
    c.geo_nodes = geo_nodes * 3 / 2;
    c.plane_dirs = plane_dirs * 3 / 2;
    c.log_ratio = std::sqrt(log_ratio);
    return c;
  }
};

/// Lambda^{-beta} of amp exp(-|v-c|^2 / (2 sigma^2)) via the Fourier transform of |eta|^{-beta} e^{-|eta|^2/2}
inline double riesz_gaussian(const Vec& c, double sigma, double amp, double beta, const Vec& v) {
  const int d = static_cast<int>(v.size());
  if (!(beta < d)) throw ValidationError("riesz_gaussian: order must be below the dimension");
  double y2 = (v - c).squaredNorm() / (sigma * sigma);
  double a = 0.5 * (d - beta);
  double base = std::pow(2.0, -0.5 * beta) * std::tgamma(a) / std::tgamma(0.5 * d) *
                boost::math::hypergeometric_1F1(a, 0.5 * d, -0.5 * y2);
  return amp * std::pow(sigma, beta) * base;
}

/// Pointwise pieces of the Carleman-form operator at one velocity.
struct CollisionPoint {
  double main = 0.0;   // Q_{s,m}(f1, f2)(v)
  double K = 0.0;      // K(f1)(v)
  double f2 = 0.0;     // f2(v)
  double rem() const { return f2 * K; }
  double total() const { return main + rem(); }
};

enum class Coefficient { Local, Frozen, Difference };

/// Carleman coefficient C_f(v, z), the Boltzmann operator Q_s and the linear pieces built from them.
class CarlemanOperator {
 public:
  explicit CarlemanOperator(const Multiplier& m, CollisionSpec spec = {})
      : m_(&m), p_(m.params()), sp_(spec), prof_(m.params()), kappa_(m.kappa()) {
    if (p_.d < 2 || p_.d > 3) throw ValidationError("collision operators are implemented for d = 2, 3");
    build_sphere();
    build_x_rule();
  }

  const ModelParams& params() const { return p_; }
  const CollisionSpec& spec() const { return sp_; }

  /// C_f(v, z) = 2^{d-1} int_{w perp z, |w| >= |z|} f(v+w) |w|^{1-kappa} A(|z|^2/|w|^2) dw
  double C(const VFunction& f, const Vec& v, const Vec& z) const {
    double rho = z.norm();
    if (rho == 0.0) throw ValidationError("carleman_C: z must be nonzero; use C_limit for z -> 0");
    Vec th = z / rho;
    Plane P = plane(th);
    Rule rr = radial_rule(rho, breaks_for(f, {v}, th, rho));
    return plane_sum(rr, v, P, [&](const Vec& w) { return f.value(w); });
  }

  /// limit of C_f(v, rho theta) as rho -> 0
  double C_limit(const VFunction& f, const Vec& v, const Vec& theta) const {
    Plane P = plane(theta);
    Rule rr = radial_rule(0.0, breaks_for(f, {v}, theta, 0.0));
    return plane_sum(rr, v, P, [&](const Vec& w) { return f.value(w); });
  }

  /// Q_{s,m}(f1,f2)(v), K(f1)(v) and f2(v) from shared C_{f1}(v +- z, z) evaluations (reference path).
  CollisionPoint point_direct(const VFunction& f1, const VFunction& f2, const Vec& v, bool want_main = true,
                       bool want_K = true) const {
    require_boltzmann();
    CollisionPoint out;
    out.f2 = f2.value(v);
    const Mat H2 = f2.hess(v);
    const double R = reach(f1, v, sp_.trunc);
    Rule rq = rho_rule(std::min(1.0, R), R);
    const double eps = rho_eps(std::min(1.0, R));
    const double s2 = 2.0 * p_.s;
    for (std::size_t i = 0; i < rq.x.size(); ++i) {
      const double rho = rq.x[i];
      double gm = 0.0, gk = 0.0;
      for (std::size_t k = 0; k < dirs_.size(); ++k) {
        const Vec& th = dirs_[k];
        const Vec z = rho * th;
        Plane P = plane(th);
        if (rho < sp_.taylor) {
          Rule rr = radial_rule(rho, breaks_for(f1, {v}, th, rho));
          double c0 = plane_sum(rr, v, P, [&](const Vec& w) { return f1.value(w); });
          if (want_main) gm += dw_[k] * 0.5 * rho * rho * th.dot(H2 * th) * c0;
          if (want_K)
            gk -= dw_[k] * 0.5 * rho * rho *
                  plane_sum(rr, v, P, [&](const Vec& w) { return th.dot(f1.hess(w) * th); });
          continue;
        }
        const Vec vp = v + z, vm = v - z;
        Rule rr = radial_rule(rho, breaks_for(f1, {v, vp, vm}, th, rho));
        double c0 = plane_sum(rr, v, P, [&](const Vec& w) { return f1.value(w); });
        if (want_main) gm -= dw_[k] * (out.f2 - 0.5 * (f2.value(vp) + f2.value(vm))) * c0;
        if (want_K) {
          double cp = plane_sum(rr, vp, P, [&](const Vec& w) { return f1.value(w); });
          double cm = plane_sum(rr, vm, P, [&](const Vec& w) { return f1.value(w); });
          gk += dw_[k] * (c0 - 0.5 * (cp + cm));
        }
      }
      const double wt = rq.w[i] * std::pow(rho, -1.0 - s2);
      out.main += wt * gm;
      out.K += wt * gk;
    }
    // (0, eps): the integrands tend to rho^{1-2s} times the Hessian limits
    double g0m = 0.0, g0k = 0.0;
    for (std::size_t k = 0; k < dirs_.size(); ++k) {
      const Vec& th = dirs_[k];
      Plane P = plane(th);
      Rule rr = radial_rule(0.0, breaks_for(f1, {v}, th, 0.0));
      if (want_main) g0m += dw_[k] * 0.5 * th.dot(H2 * th) * plane_sum(rr, v, P, [&](const Vec& w) { return f1.value(w); });
      if (want_K)
        g0k -= dw_[k] * 0.5 * plane_sum(rr, v, P, [&](const Vec& w) { return th.dot(f1.hess(w) * th); });
    }
    const double tail = std::pow(eps, 2.0 - s2) / (2.0 - s2);
    out.main += g0m * tail;
    out.K += g0k * tail;
    return out;
  }

  /// Q_{s,m}(f1,f2)(v) with the rho-integral taken inside the hyperplane integral:
  /// -2^{d-1} int_S int_0^inf F(r) r^{1-kappa} J(r) dr, J(r) = int_0^r D(rho) A(rho^2/r^2) rho^{-1-2s} d rho
  double q_main(const VFunction& f1, const VFunction& f2, const Vec& v) const {
    require_boltzmann();
    const double f2v = f2.value(v);
    const Mat H2 = f2.hess(v);
    const double s2 = 2.0 * p_.s;
    const double a0 = prof_.A(0.0);
    const double xe = x_eps();
    const double tail = a0 * std::pow(xe, 2.0 - s2) / (2.0 - s2);
    double acc = 0.0;
    for (std::size_t k = 0; k < dirs_.size(); ++k) {
      const Vec& th = dirs_[k];
      const double hq = th.dot(H2 * th);
      Plane P = plane(th);
      Rule rr = radial_rule(0.0, breaks_for(f1, {v}, th, 0.0));
      double ak = 0.0;
      for (std::size_t i = 0; i < rr.x.size(); ++i) {
        const double r = rr.x[i];
        double F = 0.0;
        for (std::size_t j = 0; j < P.e.size(); ++j) F += P.w[j] * f1.value(v + r * P.e[j]);
        if (F == 0.0) continue;
        double J = -0.5 * r * r * hq * tail;
        for (std::size_t q = 0; q < xr_.x.size(); ++q) {
          const double rho = r * xr_.x[q];
          double D = rho < sp_.taylor ? -0.5 * rho * rho * hq : f2v - 0.5 * (f2.value(v + rho * th) + f2.value(v - rho * th));
          J += xr_.w[q] * D;
        }
        ak += rr.w[i] / a0 * F * std::pow(r, -s2) * J;
      }
      acc -= dw_[k] * ak;
    }
    return acc;
  }

  /// K(f)(v) = int (C_f(v,z) - C_f(v-z,z)) dz / |z|^{d+2s}, symmetrized singular quadrature
  double K(const VFunction& f, const Vec& v) const { return point_direct(f, f, v, false, true).K; }

  /// c(gamma, s) in K(f) = c Lambda^{-d-gamma} f, calibrated once on a Gaussian with the direct K
  double cancellation_constant() const {
    std::call_once(c_once_, [&] {
      check_riesz_order();
      const int d = p_.d;
      VFunction g = gaussian_fn(Vec::Zero(d), 1.0, 1.0);
      Vec v = Vec::Zero(d);
      v(0) = 0.5;
      c_cancel_ = K(g, v) / riesz_gaussian(Vec::Zero(d), 1.0, 1.0, d + p_.gamma, v);
    });
    return c_cancel_;
  }

  /// K(f)(v) through the cancellation identity; requires gamma > -d
  double K_riesz(const VFunction& f, const Vec& v) const {
    return cancellation_constant() * riesz(f, v, p_.d + p_.gamma);
  }

  /// Q_{s,r}(f1,f2)(v) = f2(v) K(f1)(v); the identity is used when gamma > -d
  double q_rem(const VFunction& f1, const VFunction& f2, const Vec& v) const {
    double a = f2.value(v);
    if (a == 0.0) return 0.0;
    return a * (p_.gamma > -p_.d ? K_riesz(f1, v) : K(f1, v));
  }

  CollisionPoint point(const VFunction& f1, const VFunction& f2, const Vec& v) const {
    CollisionPoint c;
    c.f2 = f2.value(v);
    c.main = q_main(f1, f2, v);
    if (c.f2 != 0.0) c.K = p_.gamma > -p_.d ? K_riesz(f1, v) : K(f1, v);
    return c;
  }
  double q(const VFunction& f1, const VFunction& f2, const Vec& v) const { return point(f1, f2, v).total(); }

  /// Lambda^{-beta} f(v) = c_{d,beta} int |w|^{beta-d} f(v-w) dw, polar quadrature
  double riesz(const VFunction& f, const Vec& v, double beta) const {
    const int d = p_.d;
    if (!(beta > 0.0 && beta < d)) throw ValidationError("riesz: order must lie in (0, d)");
    const double cdb = std::tgamma(0.5 * (d - beta)) / (std::pow(std::numbers::pi, 0.5 * d) * std::pow(2.0, beta) *
                                                       std::tgamma(0.5 * beta));
    const double R = reach(f, v, sp_.trunc);
    Rule rr;
    // r = r1 t^{2/beta} removes r^{beta-1}
    const double r1 = std::min(0.25, R);
    const double m = 2.0 / beta;
    const Rule& g = gauss_legendre(sp_.line_nodes);
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double t = 0.5 * (g.x[i] + 1.0);
      rr.x.push_back(r1 * std::pow(t, m));
      rr.w.push_back(0.5 * g.w[i] * std::pow(r1, beta) * m * t);
    }
    std::vector<double> br{r1};
    while (br.back() < R) br.push_back(std::min(R, br.back() + (br.back() < 1.0 ? br.back() : 1.0)));
    Rule o = composite_rule(br, sp_.line_nodes);
    for (std::size_t i = 0; i < o.x.size(); ++i) {
      rr.x.push_back(o.x[i]);
      rr.w.push_back(o.w[i] * std::pow(o.x[i], beta - 1.0));
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < rr.x.size(); ++i) {
      double sum = 0.0;
      for (std::size_t k = 0; k < dirs_.size(); ++k)
        sum += 0.5 * dw_[k] * (f.value(v - rr.x[i] * dirs_[k]) + f.value(v + rr.x[i] * dirs_[k]));
      acc += rr.w[i] * sum;
    }
    return cdb * acc;
  }

  /// int (f(v) - f(v-z)) c(v, z^) chi(|z|) dz / |z|^{d+2s} with c = C_mu(v, .), C_mu(v0, .) or their difference
  double dominated(const VFunction& f, const Vec& v, Coefficient which, const Vec& v0) const {
    require_boltzmann();
    std::vector<double> coef(dirs_.size());
    for (std::size_t k = 0; k < dirs_.size(); ++k) {
      double loc = which == Coefficient::Frozen ? 0.0 : m_->angular_coefficient_fast(v, dirs_[k]);
      double fro = which == Coefficient::Local ? 0.0 : m_->angular_coefficient_fast(v0, dirs_[k]);
      coef[k] = which == Coefficient::Local ? loc : which == Coefficient::Frozen ? fro : fro - loc;
    }
    const double fv = f.value(v);
    const Mat H = f.hess(v);
    const double s2 = 2.0 * p_.s;
    Rule rq = rho_rule(p_.chi_inner, p_.chi_outer);
    double acc = 0.0;
    for (std::size_t i = 0; i < rq.x.size(); ++i) {
      const double rho = rq.x[i];
      double g = 0.0;
      for (std::size_t k = 0; k < dirs_.size(); ++k) {
        const Vec& th = dirs_[k];
        double D = rho < sp_.taylor ? -0.5 * rho * rho * th.dot(H * th)
                                    : fv - 0.5 * (f.value(v + rho * th) + f.value(v - rho * th));
        g += dw_[k] * coef[k] * D;
      }
      acc += rq.w[i] * std::pow(rho, -1.0 - s2) * prof_.chi(rho) * g;
    }
    double g0 = 0.0;
    for (std::size_t k = 0; k < dirs_.size(); ++k) g0 -= dw_[k] * coef[k] * 0.5 * dirs_[k].dot(H * dirs_[k]);
    double eps = rho_eps(p_.chi_inner);
    return acc + g0 * std::pow(eps, 2.0 - s2) / (2.0 - s2);
  }

  const std::vector<Vec>& directions() const { return dirs_; }
  const std::vector<double>& direction_weights() const { return dw_; }

 private:
  struct Plane {
    std::vector<Vec> e;       // in-plane unit directions
    std::vector<double> w;    // their angular weights
  };

  void require_boltzmann() const {
    if (p_.s >= 1.0) throw ValidationError("Carleman-form operator requires s < 1");
  }

  // half-sphere directions with doubled weights; all integrands are even in theta
  void build_sphere() {
    const int d = p_.d;
    if (d == 2) {
      const int n = sp_.theta_nodes;
      for (int k = 0; k < n; ++k) {
        double a = std::numbers::pi * (k + 0.5) / n;
        dirs_.push_back(vec({std::cos(a), std::sin(a)}));
        dw_.push_back(2.0 * std::numbers::pi / n);
      }
      return;
    }
    const int n = sp_.theta_nodes;
    Rule gc = gauss_legendre(n / 2, 0.0, 1.0);
    for (std::size_t i = 0; i < gc.x.size(); ++i) {
      double c = gc.x[i], sn = std::sqrt(1.0 - c * c);
      for (int j = 0; j < n; ++j) {
        double a = 2.0 * std::numbers::pi * j / n;
        dirs_.push_back(vec({sn * std::cos(a), sn * std::sin(a), c}));
        dw_.push_back(2.0 * gc.w[i] * 2.0 * std::numbers::pi / n);
      }
    }
  }

  double x_eps() const { return std::pow(0.25, sp_.rho_levels / 2); }

  // nodes in x = rho/|w| on (x_eps, 1) with weight x^{-1-2s} A(x^2)
  void build_x_rule() {
    const double s2 = 2.0 * p_.s;
    const double xm = 1.0 / std::sqrt(3.0);
    auto wt = [&](double x) { return std::pow(x, -1.0 - s2) * prof_.A(x * x); };
    std::vector<double> br{x_eps()};
    while (br.back() * sp_.log_ratio < xm) br.push_back(br.back() * sp_.log_ratio);
    br.push_back(xm);
    for (std::size_t k = 0; k + 1 < br.size(); ++k) append_log_panel(xr_, br[k], br[k + 1], sp_.rho_nodes, wt);
    // A(x^2) switches off smoothly on [xm, 1]
    Rule g = composite_rule({xm, 0.7, 0.8, 0.9, 1.0}, sp_.rho_nodes);
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      xr_.x.push_back(g.x[i]);
      xr_.w.push_back(g.w[i] * wt(g.x[i]));
    }
  }

  void check_riesz_order() const {
    if (!(p_.gamma > -p_.d)) throw ValidationError("cancellation identity comparison requires gamma > -d");
  }

  Plane plane(const Vec& th) const {
    Plane P;
    if (p_.d == 2) {
      Vec e = vec({-th(1), th(0)});
      P.e = {e, -e};
      P.w = {1.0, 1.0};
      return P;
    }
    Vec a = std::abs(th(0)) < 0.9 ? unit(3, 0) : unit(3, 1);
    Vec e1 = (a - a.dot(th) * th).normalized();
    Vec e2(3);
    e2 << th(1) * e1(2) - th(2) * e1(1), th(2) * e1(0) - th(0) * e1(2), th(0) * e1(1) - th(1) * e1(0);
    const int n = sp_.plane_dirs;
    for (int j = 0; j < n; ++j) {
      double b = 2.0 * std::numbers::pi * j / n;
      P.e.push_back(std::cos(b) * e1 + std::sin(b) * e2);
      P.w.push_back(2.0 * std::numbers::pi / n);
    }
    return P;
  }

  struct Breaks {
    std::vector<double> pts;                        // support edges in r = |w|
    std::vector<std::pair<double, double>> ranges;  // r-ranges meeting the support
  };

  // support of f on the planes {p + w : w perp theta}, as ranges of |w|
  Breaks breaks_for(const VFunction& f, std::initializer_list<Vec> ps, const Vec& th, double rho) const {
    Breaks b;
    auto add = [&](const Vec& p, const Vec& c, double R) {
      Vec q = c - p;
      double h = q.dot(th);
      if (std::abs(h) >= R) return;
      double Rp = std::sqrt(R * R - h * h);
      double del = (q - h * th).norm();
      double lo = std::max(0.0, del - Rp), hi = del + Rp;
      if (hi <= rho) return;
      b.ranges.emplace_back(std::max(lo, rho), hi);
      b.pts.push_back(std::abs(del - Rp));
      b.pts.push_back(hi);
    };
    for (const Vec& p : ps) {
      if (f.support.empty()) add(p, Vec::Zero(p_.d), sp_.trunc);
      for (const Ball& B : f.support) add(p, B.c, std::isfinite(B.R) ? B.R : sp_.trunc);
    }
    return b;
  }

  // nodes in r = |w| >= rho carrying the weight r^{d-2} r^{1-kappa} A(rho^2/r^2) 2^{d-1}
  Rule radial_rule(double rho, const Breaks& b) const {
    Rule out;
    if (b.ranges.empty()) return out;
    double r_end = 0.0;
    for (auto& [lo, hi] : b.ranges) r_end = std::max(r_end, hi);
    std::vector<double> br;
    double first;
    if (rho > 0.0) {
      br.push_back(rho);
      first = std::sqrt(3.0) * rho;
    } else {
      br.push_back(0.0);
      first = std::ldexp(1.0, -14);
    }
    if (first < r_end) br.push_back(first);
    for (double a = first * sp_.log_ratio; a < 1.0 && a < r_end; a *= sp_.log_ratio) br.push_back(a);
    for (double a = 1.0; a < r_end; a += 1.0) br.push_back(a);
    for (double x : b.pts)
      if (x > br.front() && x < r_end) br.push_back(x);
    br.push_back(r_end);
    std::sort(br.begin(), br.end());
    std::vector<double> u{br.front()};
    for (double x : br)
      if (x - u.back() > 1e-12 * std::max(1.0, x)) u.push_back(x);
    const double ex = p_.d - 1.0 - kappa_;  // r^{d-2} r^{1-kappa}
    const double pre = std::pow(2.0, p_.d - 1);
    auto weight = [&](double r) {
      double a = rho > 0.0 ? prof_.A(rho * rho / (r * r)) : prof_.A(0.0);
      return pre * std::pow(r, ex) * a;
    };
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
      double a = u[k], c = u[k + 1];
      bool hit = false;
      for (auto& [lo, hi] : b.ranges)
        if (c > lo && a < hi) hit = true;
      if (!hit) continue;
      if (a == 0.0) {
        // r = c t^m with m (1+ex) = 2 removes the r^{ex} singularity
        double m = 2.0 / (1.0 + ex);
        const Rule& g = gauss_legendre(sp_.geo_nodes);
        for (std::size_t i = 0; i < g.x.size(); ++i) {
          double t = 0.5 * (g.x[i] + 1.0);
          double r = c * std::pow(t, m);
          double a0 = prof_.A(0.0) * pre;
          out.x.push_back(r);
          out.w.push_back(0.5 * g.w[i] * a0 * std::pow(c, 1.0 + ex) * m * t);
        }
        continue;
      }
      if (a > rho && c <= 1.0) {
        append_log_panel(out, a, c, sp_.geo_nodes, weight);
        continue;
      }
      Rule g = gauss_legendre(sp_.line_nodes, a, c);
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        out.x.push_back(g.x[i]);
        out.w.push_back(g.w[i] * weight(g.x[i]));
      }
    }
    return out;
  }

  // int_a^c g(r) dr with r = e^u, Gauss-Legendre in u
  template <class W>
  static void append_log_panel(Rule& out, double a, double c, int n, W&& weight) {
    Rule g = gauss_legendre(n, std::log(a), std::log(c));
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double r = std::exp(g.x[i]);
      out.x.push_back(r);
      out.w.push_back(g.w[i] * r * weight(r));
    }
  }

  template <class G>
  double plane_sum(const Rule& rr, const Vec& p, const Plane& P, G&& g) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < rr.x.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < P.e.size(); ++j) s += P.w[j] * g(p + rr.x[i] * P.e[j]);
      acc += rr.w[i] * s;
    }
    return acc;
  }

  double rho_eps(double rho0) const { return rho0 * std::pow(0.25, sp_.rho_levels); }

  // log panels on (eps, rho0], then unit panels to R
  Rule rho_rule(double rho0, double R) const {
    Rule r;
    double eps = rho_eps(rho0);
    std::vector<double> br{eps};
    while (br.back() * sp_.log_ratio < rho0) br.push_back(br.back() * sp_.log_ratio);
    br.push_back(rho0);
    for (std::size_t k = 0; k + 1 < br.size(); ++k)
      append_log_panel(r, br[k], br[k + 1], sp_.rho_nodes, [](double) { return 1.0; });
    if (R > rho0) {
      std::vector<double> ob{rho0};
      int n = static_cast<int>(std::ceil(R - rho0 - 1e-12));
      for (int k = 1; k <= n; ++k) ob.push_back(k == n ? R : rho0 + k);
      Rule o = composite_rule(ob, sp_.outer_nodes);
      r.x.insert(r.x.end(), o.x.begin(), o.x.end());
      r.w.insert(r.w.end(), o.w.begin(), o.w.end());
    }
    return r;
  }

  const Multiplier* m_;
  ModelParams p_;
  CollisionSpec sp_;
  AngularProfile prof_;
  double kappa_;
  std::vector<Vec> dirs_;
  std::vector<double> dw_;
  Rule xr_;
  mutable std::once_flag c_once_;
  mutable double c_cancel_ = 0.0;
};

struct ConservationReport {
  double h = 0.0, L = 0.0;
  std::size_t points = 0;
  std::vector<double> moments;  // int Q phi for phi = 1, v_1..v_d, |v|^2
  std::vector<double> scale;    // int |Q| |phi|
  double edge = 0.0;            // max |Q| on the box boundary / max |Q|
  double max_rel() const {
    double r = 0.0;
    for (std::size_t k = 0; k < moments.size(); ++k) r = std::max(r, std::abs(moments[k]) / scale[k]);
    return r;
  }
};

/// Moments of Q(f, f) by the trapezoid rule with step h on [-L, L]^d; Q must vanish at the box edge.
inline ConservationReport conservation_check(const CarlemanOperator& op, const VFunction& f, double h, double L) {
  const int d = op.params().d;
  ConservationReport rep;
  rep.h = h;
  rep.L = L;
  const int n = static_cast<int>(std::lround(2.0 * L / h)) + 1;
  std::size_t total = 1;
  for (int k = 0; k < d; ++k) total *= static_cast<std::size_t>(n);
  std::vector<std::vector<double>> terms(d + 2), abs_terms(d + 2);
  double qmax = 0.0, qedge = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    Vec v(d);
    std::size_t rem = i;
    bool on_edge = false;
    for (int k = d - 1; k >= 0; --k, rem /= n) {
      int j = static_cast<int>(rem % n);
      v(k) = -L + j * h;
      on_edge = on_edge || j == 0 || j == n - 1;
    }
    double q = op.q(f, f, v);
    qmax = std::max(qmax, std::abs(q));
    if (on_edge) qedge = std::max(qedge, std::abs(q));
    std::vector<double> ph(d + 2);
    ph[0] = 1.0;
    for (int k = 0; k < d; ++k) ph[1 + k] = v(k);
    ph[d + 1] = v.squaredNorm();
    for (int k = 0; k < d + 2; ++k) {
      terms[k].push_back(q * ph[k]);
      abs_terms[k].push_back(std::abs(q * ph[k]));
    }
  }
  const double w = std::pow(h, d);
  for (int k = 0; k < d + 2; ++k) {
    rep.moments.push_back(pairwise_sum(terms[k]) * w);
    rep.scale.push_back(pairwise_sum(abs_terms[k]) * w);
  }
  rep.points = total;
  rep.edge = qedge / qmax;
  return rep;
}

/// max |Q(mu, mu)(v)| / max |Q_{s,m}(mu, mu)(v)| over the given points
inline double maxwellian_equilibrium_residual(const CarlemanOperator& op, const std::vector<Vec>& vs) {
  VFunction mu = maxwellian_fn(op.params().d);
  double num = 0.0, den = 0.0;
  for (const Vec& v : vs) {
    CollisionPoint P = op.point(mu, mu, v);
    num = std::max(num, std::abs(P.total()));
    den = std::max(den, std::abs(P.main));
  }
  return num / den;
}

/// Landau operator for analytic fields: Q_1(f1,f2) = (a*f1) : hess f2 - f2 (a : hess f1 convolved), split as
/// main = div(a*f1 grad f2) and rem = -div((a*grad f1) f2).
class LandauAnalytic {
 public:
  explicit LandauAnalytic(const ModelParams& p, CollisionSpec spec = {}) : p_(p), sp_(spec) {
    if (p_.d < 2 || p_.d > 3) throw ValidationError("Landau operator: d must be 2 or 3");
    const int d = p_.d;
    if (d == 2) {
      Rule c = circle_rule(2 * sp_.theta_nodes);
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        dirs_.push_back(vec({std::cos(c.x[i]), std::sin(c.x[i])}));
        dw_.push_back(c.w[i]);
      }
    } else {
      Rule gc = gauss_legendre(sp_.theta_nodes, -1.0, 1.0);
      Rule c = circle_rule(2 * sp_.theta_nodes);
      for (std::size_t i = 0; i < gc.x.size(); ++i) {
        double sn = std::sqrt(1.0 - gc.x[i] * gc.x[i]);
        for (std::size_t j = 0; j < c.x.size(); ++j) {
          dirs_.push_back(vec({sn * std::cos(c.x[j]), sn * std::sin(c.x[j]), gc.x[i]}));
          dw_.push_back(gc.w[i] * c.w[j]);
        }
      }
    }
  }

  struct Conv {
    Mat A;     // (a * g)(v)
    Vec c;     // (a * grad g)(v)
    double b;  // (a : hess g convolved)(v)
  };

  Conv conv(const VFunction& g, const Vec& v) const {
    const int d = p_.d;
    const double al = p_.gamma + 2.0;
    const double ex = d - 1.0 + al;
    if (!(ex > -1.0)) throw ValidationError("Landau kernel is not locally integrable for this gamma");
    const double R = reach(g, v, sp_.trunc);
    Rule rr;
    const double r1 = std::min(std::ldexp(1.0, -10), R);
    const double m = 2.0 / (1.0 + ex);
    const Rule& gl = gauss_legendre(sp_.geo_nodes);
    for (std::size_t i = 0; i < gl.x.size(); ++i) {
      double t = 0.5 * (gl.x[i] + 1.0);
      rr.x.push_back(r1 * std::pow(t, m));
      rr.w.push_back(0.5 * gl.w[i] * std::pow(r1, 1.0 + ex) * m * t);
    }
    std::vector<double> br{r1};
    while (br.back() * sp_.log_ratio < std::min(1.0, R)) br.push_back(br.back() * sp_.log_ratio);
    if (br.back() < std::min(1.0, R)) br.push_back(std::min(1.0, R));
    for (double a = br.back() + 1.0; a < R + 1.0; a += 1.0) br.push_back(std::min(a, R));
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      if (br[k + 1] <= br[k]) continue;
      if (br[k + 1] <= 1.0) {
        Rule g2 = gauss_legendre(sp_.geo_nodes, std::log(br[k]), std::log(br[k + 1]));
        for (std::size_t i = 0; i < g2.x.size(); ++i) {
          double r = std::exp(g2.x[i]);
          rr.x.push_back(r);
          rr.w.push_back(g2.w[i] * std::pow(r, 1.0 + ex));
        }
      } else {
        Rule g2 = gauss_legendre(sp_.line_nodes, br[k], br[k + 1]);
        for (std::size_t i = 0; i < g2.x.size(); ++i) {
          rr.x.push_back(g2.x[i]);
          rr.w.push_back(g2.w[i] * std::pow(g2.x[i], ex));
        }
      }
    }
    Conv out{Mat::Zero(d, d), Vec::Zero(d), 0.0};
    const Mat I = Mat::Identity(d, d);
    for (std::size_t i = 0; i < rr.x.size(); ++i)
      for (std::size_t k = 0; k < dirs_.size(); ++k) {
        const Vec& th = dirs_[k];
        Vec w = v - rr.x[i] * th;
        double gv = g.value(w);
        Vec gg = g.grad(w);
        Mat gh = g.hess(w);
        if (gv == 0.0 && gg.squaredNorm() == 0.0) continue;
        Mat P = I - th * th.transpose();
        double wt = rr.w[i] * dw_[k];
        out.A += wt * gv * P;
        out.c += wt * (P * gg);
        out.b += wt * (P.cwiseProduct(gh)).sum();
      }
    return out;
  }

  /// main and remainder parts at v
  std::pair<double, double> split(const VFunction& f1, const VFunction& f2, const Vec& v) const {
    Conv c1 = conv(f1, v);
    double f2v = f2.value(v);
    double cg = c1.c.dot(f2.grad(v));
    return {(c1.A.cwiseProduct(f2.hess(v))).sum() + cg, -cg - f2v * c1.b};
  }
  double q(const VFunction& f1, const VFunction& f2, const Vec& v) const {
    auto [a, b] = split(f1, f2, v);
    return a + b;
  }

 private:
  ModelParams p_;
  CollisionSpec sp_;
  std::vector<Vec> dirs_;
  std::vector<double> dw_;
};

struct GrazingRow {
  double s = 0.0;
  double c_fit = 0.0;     // least-squares c in (1-s) Q_s ~ c Q_1
  double residual = 0.0;  // |(1-s) Q_s - c Q_1| / |c Q_1|
  double residual_q1 = 0.0;  // |(1-s) Q_s - c Q_1| / |Q_1|
};

struct GrazingReport {
  double gamma = 0.0;
  std::vector<GrazingRow> rows;
  bool strictly_decreasing() const {
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (!(rows[i].residual < rows[i - 1].residual)) return false;
    return !rows.empty();
  }
  /// max |c_i - c_j| / max |c|
  double c_spread() const {
    double lo = 1e300, hi = -1e300, m = 0.0;
    for (auto& r : rows) {
      lo = std::min(lo, r.c_fit);
      hi = std::max(hi, r.c_fit);
      m = std::max(m, std::abs(r.c_fit));
    }
    return rows.empty() ? 0.0 : (hi - lo) / m;
  }
};

/// (1-s) Q_s(f1, f2) against Q_1(f1, f2) at the points vs, same gamma and dimension.
inline GrazingReport grazing_limit_check(int d, double gamma, const VFunction& f1, const VFunction& f2,
                                         const std::vector<double>& s_list, const std::vector<Vec>& vs,
                                         CollisionSpec spec = {}) {
  GrazingReport rep;
  rep.gamma = gamma;
  LandauAnalytic L(ModelParams::make(d, 1.0, gamma), spec);
  std::vector<double> q1(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) q1[i] = L.q(f1, f2, vs[i]);
  for (double s : s_list) {
    Multiplier m(ModelParams::make(d, s, gamma));
    CarlemanOperator op(m, spec);
    std::vector<double> r(vs.size());
    for (std::size_t i = 0; i < vs.size(); ++i) {
      double main = op.q_main(f1, f2, vs[i]);
      double f2v = f2.value(vs[i]);
      double rem = f2v != 0.0 ? f2v * op.K(f1, vs[i]) : 0.0;
      r[i] = (1.0 - s) * (main + rem);
    }
    double rq = 0.0, qq = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
      rq += r[i] * q1[i];
      qq += q1[i] * q1[i];
    }
    GrazingRow row;
    row.s = s;
    row.c_fit = rq / qq;
    double e = 0.0;
    for (std::size_t i = 0; i < vs.size(); ++i) e += std::pow(r[i] - row.c_fit * q1[i], 2);
    row.residual = std::sqrt(e / qq) / std::abs(row.c_fit);
    row.residual_q1 = std::sqrt(e / qq);
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace kk

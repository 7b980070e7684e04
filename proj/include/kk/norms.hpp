#pragma once

#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "field.hpp"
#include "geometry.hpp"
#include "params.hpp"
#include "quadrature.hpp"
#include "semigroup.hpp"

namespace kk {

/// w_1(x, v) = <x,v>^{varkappa1} <v>^{varkappa2}
struct WeightSpec {
  double varkappa1 = 0.0;
  double varkappa2 = 0.0;
  void validate() const {
    if (!(varkappa1 >= 0.0 && varkappa2 >= 0.0)) throw ValidationError("norm weights must be nonnegative");
  }
  double operator()(const Vec& x, const Vec& v) const {
    return std::pow(japanese(x, v), varkappa1) * std::pow(japanese(v), varkappa2);
  }
};

struct NormSpec {
  int radial_nodes = 12;   // per radial panel
  int angle_nodes = 8;     // per angular panel
  int grade_levels = 10;   // max dyadic levels towards the kink {theta . v0 = 0}
  int phi_nodes = 16;      // azimuthal trapezoid nodes (d = 3)
  int v0_angles = 8;       // coarse v0 directions over a half circle
  std::vector<double> v0_radii{0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
  double v_reach = 9.0;    // radial w-truncation in units of the field's v-scale
  int ball_rings = 3;      // x1-ball lattice for analytic fields
  int lattice_stride_x = 2;
  int lattice_stride_v = 4;
  int refine_levels = 3;
  double nm_tol = 1e-9;
  int nm_iter = 4000;
  double panel_width = 0.0;  // radial panel width for analytic fields; 0 uses the field's v-scale

  NormSpec refined() const {
    NormSpec r = *this;
    r.radial_nodes = radial_nodes * 3 / 2;
    r.angle_nodes = angle_nodes * 3 / 2;
    r.grade_levels = grade_levels + 2;
    r.phi_nodes = phi_nodes * 3 / 2;
    return r;
  }
};

/// A phase-space function with decay metadata: significant values live within a few x_scale / v_scale of the centres.
struct PhaseFunction {
  std::function<double(const Vec&, const Vec&)> f;
  Vec x_center, v_center;
  double x_scale = 1.0;
  double v_scale = 1.0;
};

inline PhaseFunction phase_gaussian(const Vec& xc, double sx, const Vec& vc, double sv, double amp) {
  PhaseFunction F;
  F.f = [=](const Vec& x, const Vec& v) {
    return amp * std::exp(-0.5 * (x - xc).squaredNorm() / (sx * sx) - 0.5 * (v - vc).squaredNorm() / (sv * sv));
  };
  F.x_center = xc;
  F.v_center = vc;
  F.x_scale = sx;
  F.v_scale = sv;
  return F;
}

/// f_lambda(x, v) = lambda^{-nu(d+gamma)-1} f(x / lambda^{1+nu}, v / lambda^nu)
inline PhaseFunction scaled(const PhaseFunction& F, const ModelParams& p, double lambda, double nu) {
  if (!(lambda > 0.0)) throw ValidationError("scaling: lambda must be positive");
  const double amp = scaling_amplitude(p, lambda, nu);
  const double sx = std::pow(lambda, 1.0 + nu), sv = std::pow(lambda, nu);
  PhaseFunction G;
  auto f = F.f;
  G.f = [=](const Vec& x, const Vec& v) { return amp * f(x / sx, v / sv); };
  G.x_center = F.x_center * sx;
  G.v_center = F.v_center * sv;
  G.x_scale = F.x_scale * sx;
  G.v_scale = F.v_scale * sv;
  return G;
}

namespace detail {

struct DirRule {
  std::vector<Vec> dir;
  std::vector<double> w;
};

/// Directions on S^{d-1} graded towards the great circle {theta . e = 0}, where |theta . v0| has its kink.
/// a = |v0| sets the width 1/a of the kink layer.
inline DirRule kink_directions(int d, const Vec& e, double a, const NormSpec& ns) {
  DirRule R;
  int levels = a > 0.0 ? std::clamp(static_cast<int>(std::ceil(std::log2(std::max(1.0, 64.0 * a)))), 1, ns.grade_levels) : 0;
  auto graded = [&](double L) {
    // breaks on [0, L] graded towards 0
    std::vector<double> br{0.0};
    for (int k = levels; k >= 1; --k) br.push_back(L * std::ldexp(1.0, -k));
    br.push_back(L);
    return br;
  };
  if (d == 2) {
    Vec perp(2);
    perp << -e(1), e(0);
    const double h = 0.5 * std::numbers::pi;
    std::vector<double> br = graded(h);
    // psi measured from perp: theta = cos(psi) perp + sin(psi) e; kinks at psi = 0 and pi
    for (int q = 0; q < 4; ++q)
      for (std::size_t k = 0; k + 1 < br.size(); ++k) {
        double lo = br[k], hi = br[k + 1];
        Rule g = gauss_legendre(ns.angle_nodes, lo, hi);
        for (std::size_t i = 0; i < g.x.size(); ++i) {
          double u = g.x[i];
          double psi = (q == 0) ? u : (q == 1) ? std::numbers::pi - u : (q == 2) ? std::numbers::pi + u : -u;
          R.dir.push_back(std::cos(psi) * perp + std::sin(psi) * e);
          R.w.push_back(g.w[i]);
        }
      }
    return R;
  }
  // d = 3: c = theta . e in [-1, 1], graded towards 0 on both sides; azimuth by trapezoid
  Vec e1 = std::abs(e(0)) < 0.9 ? unit(3, 0) : unit(3, 1);
  e1 -= e1.dot(e) * e;
  e1.normalize();
  Vec e2(3);
  e2 << e(1) * e1(2) - e(2) * e1(1), e(2) * e1(0) - e(0) * e1(2), e(0) * e1(1) - e(1) * e1(0);
  std::vector<double> br = graded(1.0);
  Rule ph = circle_rule(ns.phi_nodes);
  for (int sgn : {-1, 1})
    for (std::size_t k = 0; k + 1 < br.size(); ++k) {
      Rule g = gauss_legendre(ns.angle_nodes, br[k], br[k + 1]);
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        double c = sgn * g.x[i], sn = std::sqrt(std::max(0.0, 1.0 - c * c));
        for (std::size_t j = 0; j < ph.x.size(); ++j) {
          R.dir.push_back(c * e + sn * (std::cos(ph.x[j]) * e1 + std::sin(ph.x[j]) * e2));
          R.w.push_back(g.w[i] * ph.w[j]);
        }
      }
    }
  return R;
}

/// Directions on the unit sphere of the hyperplane perpendicular to e (d-1 dimensional), full measure.
inline DirRule plane_directions(int d, const Vec& e, const NormSpec& ns) {
  DirRule R;
  if (d == 2) {
    Vec perp(2);
    perp << -e(1), e(0);
    R.dir = {perp, Vec(-perp)};
    R.w = {1.0, 1.0};
    return R;
  }
  Vec e1 = std::abs(e(0)) < 0.9 ? unit(3, 0) : unit(3, 1);
  e1 -= e1.dot(e) * e;
  e1.normalize();
  Vec e2(3);
  e2 << e(1) * e1(2) - e(2) * e1(1), e(2) * e1(0) - e(0) * e1(2), e(0) * e1(1) - e(1) * e1(0);
  Rule ph = circle_rule(ns.phi_nodes);
  for (std::size_t j = 0; j < ph.x.size(); ++j) {
    R.dir.push_back(std::cos(ph.x[j]) * e1 + std::sin(ph.x[j]) * e2);
    R.w.push_back(ph.w[j]);
  }
  return R;
}

/// int_0^R r^alpha g(r) dr with a Gauss-Jacobi first panel of width h and Gauss-Legendre panels after it.
template <class G>
double radial_integral(G&& g, double alpha, double R, double h, int n) {
  if (R <= 0.0) return 0.0;
  double acc = 0.0;
  double a = std::min(h, R);
  Rule j = gauss_jacobi_power(n, alpha, a);
  for (std::size_t i = 0; i < j.x.size(); ++i) acc += j.w[i] * g(j.x[i]);
  while (a < R) {
    double b = std::min(a + h, R);
    Rule l = gauss_legendre(n, a, b);
    for (std::size_t i = 0; i < l.x.size(); ++i) acc += l.w[i] * std::pow(l.x[i], alpha) * g(l.x[i]);
    a = b;
  }
  return acc;
}

inline Vec axis_of(const Vec& v0) {
  const int d = static_cast<int>(v0.size());
  return v0.norm() > 0.0 ? Vec(v0 / v0.norm()) : unit(d, d - 1);
}

/// Maximize obj over R^n from x0 with the Nelder-Mead simplex.
inline std::pair<std::vector<double>, double> nm_maximize(const std::function<double(const std::vector<double>&)>& obj,
                                                          std::vector<double> x0, double step, double tol, int iters) {
  const std::size_t n = x0.size();
  struct Ctx {
    const std::function<double(const std::vector<double>&)>* f;
    std::size_t n;
  } ctx{&obj, n};
  gsl_multimin_function F;
  F.n = n;
  F.params = &ctx;
  F.f = [](const gsl_vector* x, void* p) -> double {
    auto* c = static_cast<Ctx*>(p);
    std::vector<double> y(c->n);
    for (std::size_t i = 0; i < c->n; ++i) y[i] = gsl_vector_get(x, i);
    return -(*c->f)(y);
  };
  gsl_vector* x = gsl_vector_alloc(n);
  gsl_vector* ss = gsl_vector_alloc(n);
  for (std::size_t i = 0; i < n; ++i) {
    gsl_vector_set(x, i, x0[i]);
    gsl_vector_set(ss, i, step);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, n);
  gsl_multimin_fminimizer_set(s, &F, x, ss);
  for (int it = 0; it < iters; ++it) {
    if (gsl_multimin_fminimizer_iterate(s)) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), tol) == GSL_SUCCESS) break;
  }
  std::vector<double> best(n);
  for (std::size_t i = 0; i < n; ++i) best[i] = gsl_vector_get(s->x, i);
  double val = -s->fval;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(x);
  gsl_vector_free(ss);
  return {best, val};
}

}  // namespace detail

/// Anisotropic Riesz-type integrals of a nonnegative profile M(v') around v for a fixed v0.
class AnisotropicRiesz {
 public:
  AnisotropicRiesz(const ModelParams& p, NormSpec ns = {}) : p_(p), ns_(ns), kappa_(p.kappa()) {}

  const NormSpec& spec() const { return ns_; }
  double kappa() const { return kappa_; }

  /// int 1_{[w]_{v0} <= 1} [w]_{v0}^{-kappa} M(v + w) dw ; untruncated when truncated = false.
  /// h is the radial panel width (the profile's length scale), R the radial reach for the untruncated integral.
  template <class M>
  double integral(M&& m, const Vec& v, const Vec& v0, bool truncated, double h, double R) const {
    const int d = p_.d;
    const double a = v0.norm();
    detail::DirRule dr = detail::kink_directions(d, detail::axis_of(v0), a, ns_);
    const double alpha = d - 1.0 - kappa_;
    double acc = 0.0;
    for (std::size_t k = 0; k < dr.dir.size(); ++k) {
      const Vec& th = dr.dir[k];
      double q = 1.0 + std::abs(th.dot(v0));
      double rmax = truncated ? 1.0 / q : R;
      auto g = [&](double r) { return m(Vec(v + r * th)); };
      acc += dr.w[k] * std::pow(q, -kappa_) * detail::radial_integral(g, alpha, rmax, h, ns_.radial_nodes);
    }
    return acc;
  }

  /// lim_{|v0| -> inf} <v0> times the integral above, v0 along e.
  template <class M>
  double limit(M&& m, const Vec& v, const Vec& e, bool truncated, double h, double R) const {
    const int d = p_.d;
    detail::DirRule pr = detail::plane_directions(d, e, ns_);
    double acc = 0.0;
    for (std::size_t k = 0; k < pr.dir.size(); ++k) {
      const Vec& th = pr.dir[k];
      auto g = [&](double r) { return m(Vec(v + r * th)); };
      if (!truncated) {
        // (2/(kappa-1)) int_{e-perp} |y|^{1-kappa} M(v+y) dy
        if (!(kappa_ > 1.0)) return std::numeric_limits<double>::infinity();
        acc += pr.w[k] * 2.0 / (kappa_ - 1.0) * detail::radial_integral(g, d - 1.0 - kappa_, R, h, ns_.radial_nodes);
      } else {
        // int_{e-perp, |y|<=1} M(v+y) 2 (1 - |y|^{1-kappa})/(1 - kappa) dy
        double k1 = std::abs(kappa_ - 1.0) < 1e-9 ? 1.0 + 1e-6 : kappa_;
        double i1 = detail::radial_integral(g, d - 2.0, 1.0, h, ns_.radial_nodes);
        double i2 = detail::radial_integral(g, d - 1.0 - k1, 1.0, h, ns_.radial_nodes);
        acc += pr.w[k] * 2.0 * (i1 - i2) / (1.0 - k1);
      }
    }
    return acc;
  }

 private:
  ModelParams p_;
  NormSpec ns_;
  double kappa_;
};

/// Value and maximizer of a sup over v0.
struct IReport {
  double value = 0.0;
  Vec v0;
  bool v0_at_infinity = false;
  bool v0_on_boundary = false;
};

namespace detail {

/// sup over v0 of <v0> * integral(v0): coarse (radius, direction) lattice, the |v0| = inf limit,
/// then Brent polish in |v0| and in the direction angle (d = 2).
template <class Integral, class Limit>
IReport sup_over_v0(int d, const NormSpec& ns, Integral&& I, Limit&& L) {
  std::vector<Vec> dirs;
  if (d == 2) {
    for (int k = 0; k < ns.v0_angles; ++k) {
      double a = std::numbers::pi * k / ns.v0_angles;
      dirs.push_back(vec({std::cos(a), std::sin(a)}));
    }
  } else {
    // upper hemisphere lattice
    dirs.push_back(unit(3, 2));
    for (int ring = 1; ring <= 2; ++ring) {
      double th = 0.5 * std::numbers::pi * ring / 2.0;
      int m = 2 * ns.v0_angles / (3 - ring);
      for (int k = 0; k < m; ++k) {
        double ph = (ring == 2 ? std::numbers::pi : 2.0 * std::numbers::pi) * k / m;
        dirs.push_back(vec({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)}));
      }
    }
  }
  IReport best;
  best.value = -1.0;
  double best_r = 0.0;
  Vec best_e = dirs[0];
  auto consider = [&](double val, double r, const Vec& e) {
    if (val > best.value) {
      best.value = val;
      best_r = r;
      best_e = e;
    }
  };
  consider(I(Vec(Vec::Zero(d))), 0.0, dirs[0]);
  for (const Vec& e : dirs) {
    for (double r : ns.v0_radii)
      if (r > 0.0) consider(japanese(r) * I(Vec(r * e)), r, e);
    consider(L(e), std::numeric_limits<double>::infinity(), e);
  }
  const double rmax = ns.v0_radii.back();
  if (std::isinf(best_r)) {
    best.v0_at_infinity = true;
    best.v0 = best_e * std::numeric_limits<double>::infinity();
    return best;
  }
  // Brent in |v0| on the bracket around the lattice maximizer
  auto it = std::find(ns.v0_radii.begin(), ns.v0_radii.end(), best_r);
  std::size_t j = static_cast<std::size_t>(it - ns.v0_radii.begin());
  double lo = j > 0 ? ns.v0_radii[j - 1] : 0.0;
  double hi = j + 1 < ns.v0_radii.size() ? ns.v0_radii[j + 1] : rmax;
  auto fr = [&](double r) { return -(japanese(r) * I(Vec(r * best_e))); };
  auto br = boost::math::tools::brent_find_minima(fr, lo, hi, 30);
  if (-br.second > best.value) {
    best.value = -br.second;
    best_r = br.first;
  }
  if (d == 2 && best_r > 0.0) {
    double a0 = std::atan2(best_e(1), best_e(0));
    double da = std::numbers::pi / ns.v0_angles;
    auto fa = [&](double a) { return -(japanese(best_r) * I(Vec(best_r * vec({std::cos(a), std::sin(a)})))); };
    auto ba = boost::math::tools::brent_find_minima(fa, a0 - da, a0 + da, 30);
    if (-ba.second > best.value) {
      best.value = -ba.second;
      best_e = vec({std::cos(ba.first), std::sin(ba.first)});
    }
  }
  best.v0 = best_r * best_e;
  best.v0_on_boundary = best_r >= rmax * (1.0 - 1e-6);
  return best;
}

}  // namespace detail

/// sup_{|x1| <= 1} |F|(x + x1, v) on a ball lattice (centre plus rings).
inline double ball_max(const PhaseFunction& F, const Vec& x, const Vec& v, int rings) {
  const int d = static_cast<int>(x.size());
  double m = std::abs(F.f(x, v));
  for (int r = 1; r <= rings; ++r) {
    double rad = static_cast<double>(r) / rings;
    if (d == 2) {
      int n = 6 * r;
      for (int k = 0; k < n; ++k) {
        double a = 2.0 * std::numbers::pi * k / n;
        m = std::max(m, std::abs(F.f(Vec(x + rad * vec({std::cos(a), std::sin(a)})), v)));
      }
    } else {
      int nt = 2 * r + 1;
      for (int i = 0; i <= nt; ++i) {
        double th = std::numbers::pi * i / nt;
        int np = std::max(1, static_cast<int>(std::round(2 * nt * std::sin(th))));
        for (int k = 0; k < np; ++k) {
          double ph = 2.0 * std::numbers::pi * k / np;
          Vec u = vec({std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
          m = std::max(m, std::abs(F.f(Vec(x + rad * u), v)));
        }
      }
    }
  }
  return m;
}

/// I f(x, v) for an analytic field, x1-sup on a ball lattice.
inline IReport riesz_I(const PhaseFunction& F, const Vec& x, const Vec& v, const ModelParams& p, const NormSpec& ns = {}) {
  AnisotropicRiesz A(p, ns);
  auto M = [&](const Vec& w) { return ball_max(F, x, w, ns.ball_rings); };
  double h = std::min(1.0, F.v_scale);
  auto I = [&](const Vec& v0) { return A.integral(M, v, v0, true, h, 1.0); };
  auto L = [&](const Vec& e) { return A.limit(M, v, e, true, h, 1.0); };
  return detail::sup_over_v0(p.d, ns, I, L);
}

/// x1-ball maxima of |f| on the grid, interpolated multilinearly in v (zero outside the v-box).
class BallMaxField {
 public:
  explicit BallMaxField(const KineticField& f) : g_(f.grid), m_(f.grid.size(), 0.0) {
    const PhaseGrid& g = g_;
    std::vector<std::size_t> nb;
    for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
      nb.clear();
      Vec xi = g.x_at(ix);
      for (std::size_t jx = 0; jx < g.nxs(); ++jx) {
        Vec dx = g.x_at(jx) - xi;
        for (int k = 0; k < g.d; ++k) dx(k) -= g.Lx * std::round(dx(k) / g.Lx);
        if (dx.norm() <= 1.0 + 1e-12) nb.push_back(jx);
      }
      for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
        double m = 0.0;
        for (std::size_t jx : nb) m = std::max(m, std::abs(f.at(jx, iv)));
        m_[ix * g.nvs() + iv] = m;
      }
    }
  }
  const PhaseGrid& grid() const { return g_; }
  double at(std::size_t ix, std::size_t iv) const { return m_[ix * g_.nvs() + iv]; }

  double operator()(std::size_t ix, const Vec& v) const {
    const int d = g_.d;
    const double h = g_.dv();
    std::array<int, 3> i0{0, 0, 0};
    std::array<double, 3> t{0, 0, 0};
    for (int k = 0; k < d; ++k) {
      double u = (v(k) + g_.V) / h;
      if (u < 0.0 || u > g_.nv - 1) return 0.0;
      i0[k] = std::min(static_cast<int>(std::floor(u)), g_.nv - 2);
      t[k] = u - i0[k];
    }
    double acc = 0.0;
    for (int c = 0; c < (1 << d); ++c) {
      double w = 1.0;
      std::size_t iv = 0;
      for (int k = 0; k < d; ++k) {
        int b = (c >> k) & 1;
        w *= b ? t[k] : 1.0 - t[k];
        iv = iv * g_.nv + (i0[k] + b);
      }
      if (w != 0.0) acc += w * m_[ix * g_.nvs() + iv];
    }
    return acc;
  }

 private:
  PhaseGrid g_;
  std::vector<double> m_;
};

/// I f at the grid x-point ix and velocity v.
inline IReport riesz_I(const BallMaxField& M, std::size_t ix, const Vec& v, const ModelParams& p, const NormSpec& ns = {}) {
  AnisotropicRiesz A(p, ns);
  auto m = [&](const Vec& w) { return M(ix, w); };
  double h = std::min(1.0, 2.0 * M.grid().dv());
  auto I = [&](const Vec& v0) { return A.integral(m, v, v0, true, h, 1.0); };
  auto L = [&](const Vec& e) { return A.limit(m, v, e, true, h, 1.0); };
  return detail::sup_over_v0(p.d, ns, I, L);
}

struct NormReport {
  double value = 0.0;
  Vec x, v, v0;
  double inner_error = 0.0;   // |I - I_refined| / I at the maximizer
  bool boundary = false;      // maximizer on the v-lattice edge
  bool v0_boundary = false;   // v0 maximizer at the search-box edge or at infinity
};

/// ||f||_cr = sup_{x,v} w_1(x,v) I f(x,v) on the grid: strided lattice, then refinement in v around the maximizer.
inline NormReport critical_norm(const KineticField& f, const ModelParams& p, const WeightSpec& wts,
                                const NormSpec& ns = {}) {
  wts.validate();
  const PhaseGrid& g = f.grid;
  if (g.d != p.d) throw ValidationError("critical_norm: grid dimension does not match the model");
  NormReport rep;
  if (f.max_abs() == 0.0) {
    rep.x = g.x_at(0);
    rep.v = Vec::Zero(g.d);
    rep.v0 = Vec::Zero(g.d);
    return rep;
  }
  BallMaxField M(f);
  double best = -1.0;
  std::size_t bx = 0;
  Vec bv, bv0;
  bool bv0b = false;
  auto eval = [&](std::size_t ix, const Vec& v) {
    IReport r = riesz_I(M, ix, v, p, ns);
    double val = wts(g.x_at(ix), v) * r.value;
    if (val > best) {
      best = val;
      bx = ix;
      bv = v;
      bv0 = r.v0;
      bv0b = r.v0_at_infinity || r.v0_on_boundary;
    }
  };
  const int sx = std::max(1, ns.lattice_stride_x), sv = std::max(1, ns.lattice_stride_v);
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    auto mx = PhaseGrid::unflatten(ix, g.nx, g.d);
    bool keep = true;
    for (int k = 0; k < g.d; ++k) keep = keep && mx[k] % sx == 0;
    if (!keep) continue;
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
      auto mv = PhaseGrid::unflatten(iv, g.nv, g.d);
      bool kv = true;
      for (int k = 0; k < g.d; ++k) kv = kv && mv[k] % sv == 0;
      if (!kv || M.at(ix, iv) == 0.0) continue;
      eval(ix, g.v_at(iv));
    }
  }
  // refine: x over all grid neighbours, v over halved offsets
  double hv = sv * g.dv();
  for (int lvl = 0; lvl < ns.refine_levels; ++lvl) {
    hv *= 0.5;
    std::size_t cx = bx;
    Vec cv = bv;
    std::vector<std::size_t> xs{cx};
    auto mx = PhaseGrid::unflatten(cx, g.nx, g.d);
    for (int k = 0; k < g.d; ++k)
      for (int s = -1; s <= 1; s += 2) {
        auto m2 = mx;
        m2[k] = ((m2[k] + s) % g.nx + g.nx) % g.nx;
        std::size_t j = 0;
        for (int q = 0; q < g.d; ++q) j = j * g.nx + m2[q];
        if (j != cx) xs.push_back(j);
      }
    int n3 = 1;
    for (int k = 0; k < g.d; ++k) n3 *= 3;
    for (std::size_t ix : xs)
      for (int c = 0; c < n3; ++c) {
        Vec v = cv;
        int cc = c;
        for (int k = 0; k < g.d; ++k) {
          v(k) += (cc % 3 - 1) * hv;
          cc /= 3;
        }
        eval(ix, v);
      }
  }
  rep.value = best;
  rep.x = g.x_at(bx);
  rep.v = bv;
  rep.v0 = bv0;
  rep.v0_boundary = bv0b;
  for (int k = 0; k < g.d; ++k) rep.boundary = rep.boundary || std::abs(bv(k)) >= g.V - sv * g.dv();
  IReport fine = riesz_I(M, bx, bv, p, ns.refined());
  double coarse = best / wts(g.x_at(bx), bv);
  rep.inner_error = coarse > 0 ? std::abs(fine.value - coarse) / coarse : 0.0;
  return rep;
}

/// Report of the untruncated scale-invariant functional sup_{x,v,v1} <v1> int [w]_{v1}^{-kappa} |f|(x, v+w) dw.
struct FunctionalReport {
  double value = 0.0;
  Vec x, v, v1;
  bool v1_at_infinity = false;
  double finite_sup = 0.0;
  double limit_sup = 0.0;
};

/// Untruncated functional for an analytic field. Requires kappa > 1, otherwise the sup over v1 is infinite.
/// The search runs in coordinates normalized by the field's centres and scales.
inline FunctionalReport scaling_invariant_functional(const PhaseFunction& F, const ModelParams& p, const NormSpec& ns = {}) {
  const int d = p.d;
  if (!(p.kappa() > 1.0))
    throw ValidationError("untruncated functional is infinite unless kappa > 1 (sup over v1 diverges)");
  AnisotropicRiesz A(p, ns);
  const double h = ns.panel_width > 0.0 ? ns.panel_width : F.v_scale;
  auto unpack = [&](const std::vector<double>& z, Vec& x, Vec& v, Vec& v1) {
    x.resize(d);
    v.resize(d);
    v1.resize(d);
    for (int k = 0; k < d; ++k) {
      x(k) = F.x_center(k) + F.x_scale * z[k];
      v(k) = F.v_center(k) + F.v_scale * z[d + k];
      v1(k) = z[2 * d + k];
    }
  };
  auto reach = [&](const Vec& v) { return (v - F.v_center).norm() + ns.v_reach * F.v_scale; };
  auto obj = [&](const std::vector<double>& z) {
    Vec x, v, v1;
    unpack(z, x, v, v1);
    auto m = [&](const Vec& w) { return std::abs(F.f(x, w)); };
    return japanese(v1) * A.integral(m, v, v1, false, h, reach(v));
  };
  // limit |v1| -> inf: z = (x, v, direction angle(s))
  auto limit_obj = [&](const std::vector<double>& z) {
    Vec x(d), v(d);
    for (int k = 0; k < d; ++k) {
      x(k) = F.x_center(k) + F.x_scale * z[k];
      v(k) = F.v_center(k) + F.v_scale * z[d + k];
    }
    Vec e = d == 2 ? vec({std::cos(z[2 * d]), std::sin(z[2 * d])})
                   : vec({std::sin(z[2 * d]) * std::cos(z[2 * d + 1]), std::sin(z[2 * d]) * std::sin(z[2 * d + 1]),
                          std::cos(z[2 * d])});
    auto m = [&](const Vec& w) { return std::abs(F.f(x, w)); };
    return A.limit(m, v, e, false, h, reach(v));
  };
  // coarse lattice: x at the centre, v on {-1/2, 0, 1/2}^d scales, v1 in {0} and |v1| = 1
  std::vector<double> vs{-0.5, 0.0, 0.5};
  std::vector<Vec> v1s{Vec::Zero(d)};
  for (int k = 0; k < 4; ++k) {
    double a = std::numbers::pi * k / 4.0;
    Vec u = Vec::Zero(d);
    u(0) = std::cos(a);
    u(1) = std::sin(a);
    v1s.push_back(u);
  }
  std::vector<std::pair<double, std::vector<double>>> cand;
  const int nvl = static_cast<int>(std::pow(3, d));
  for (int iv = 0; iv < nvl; ++iv)
    for (const Vec& u : v1s) {
      std::vector<double> z(3 * d, 0.0);
      int b = iv;
      for (int k = 0; k < d; ++k) {
        z[d + k] = vs[b % 3];
        b /= 3;
        z[2 * d + k] = u(k);
      }
      cand.emplace_back(obj(z), z);
    }
  std::sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.first > b.first; });
  FunctionalReport rep;
  double best = -1.0;
  std::vector<double> bz;
  for (std::size_t i = 0; i < std::min<std::size_t>(2, cand.size()); ++i) {
    auto [z, val] = detail::nm_maximize(obj, cand[i].second, 0.25, ns.nm_tol, ns.nm_iter);
    if (val > best) {
      best = val;
      bz = z;
    }
  }
  rep.finite_sup = best;
  // limit search from the finite maximizer's (x, v) over a few directions
  double lbest = -1.0;
  std::vector<double> lz;
  const int nang = d == 2 ? 8 : 4;
  for (int k = 0; k < nang; ++k) {
    std::vector<double> z(bz.begin(), bz.begin() + 2 * d);
    z.push_back(std::numbers::pi * k / nang);
    if (d == 3) z.push_back(0.0);
    auto [zz, val] = detail::nm_maximize(limit_obj, z, 0.25, ns.nm_tol * 100, ns.nm_iter / 4);
    if (val > lbest) {
      lbest = val;
      lz = zz;
    }
  }
  rep.limit_sup = lbest;
  Vec x, v, v1;
  unpack(bz, x, v, v1);
  if (lbest > best) {
    rep.value = lbest;
    rep.v1_at_infinity = true;
    for (int k = 0; k < d; ++k) {
      x(k) = F.x_center(k) + F.x_scale * lz[k];
      v(k) = F.v_center(k) + F.v_scale * lz[d + k];
    }
    v1 = Vec::Constant(d, std::numeric_limits<double>::infinity());
  } else {
    rep.value = best;
  }
  rep.x = x;
  rep.v = v;
  rep.v1 = v1;
  return rep;
}

/// Truncated critical functional sup_{x,v} w_1 I f for an analytic field (lattice plus Nelder-Mead in (x, v)).
inline NormReport critical_norm(const PhaseFunction& F, const ModelParams& p, const WeightSpec& wts, const NormSpec& ns = {}) {
  wts.validate();
  const int d = p.d;
  auto obj = [&](const std::vector<double>& z) {
    Vec x(d), v(d);
    for (int k = 0; k < d; ++k) {
      x(k) = F.x_center(k) + F.x_scale * z[k];
      v(k) = F.v_center(k) + F.v_scale * z[d + k];
    }
    return wts(x, v) * riesz_I(F, x, v, p, ns).value;
  };
  std::vector<double> grid1{-1.0, 0.0, 1.0};
  const int n = static_cast<int>(std::pow(3, 2 * d));
  double best = -1.0;
  std::vector<double> bz;
  for (int c = 0; c < n; ++c) {
    std::vector<double> z(2 * d);
    int a = c;
    for (int k = 0; k < 2 * d; ++k) {
      z[k] = grid1[a % 3];
      a /= 3;
    }
    double val = obj(z);
    if (val > best) {
      best = val;
      bz = z;
    }
  }
  auto [z, val] = detail::nm_maximize(obj, bz, 0.25, 1e-6, 400);
  NormReport rep;
  rep.value = std::max(val, best);
  if (val < best) z = bz;
  rep.x.resize(d);
  rep.v.resize(d);
  for (int k = 0; k < d; ++k) {
    rep.x(k) = F.x_center(k) + F.x_scale * z[k];
    rep.v(k) = F.v_center(k) + F.v_scale * z[d + k];
  }
  IReport r = riesz_I(F, rep.x, rep.v, p, ns);
  rep.v0 = r.v0;
  rep.v0_boundary = r.v0_at_infinity || r.v0_on_boundary;
  IReport fine = riesz_I(F, rep.x, rep.v, p, ns.refined());
  rep.inner_error = r.value > 0 ? std::abs(fine.value - r.value) / r.value : 0.0;
  return rep;
}

struct ScalingRow {
  double lambda = 1.0;
  double value = 0.0;
  double rel_dev = 0.0;
};

struct ScalingReport {
  double nu = 0.0;
  double base = 0.0;
  std::vector<ScalingRow> rows;
  std::vector<ScalingRow> fixed_rows;  // same radial panels for every lambda (discretization not rescaled)
  double max_dev() const {
    double m = 0.0;
    for (auto& r : rows) m = std::max(m, r.rel_dev);
    return m;
  }
};

/// Untruncated functional of f_lambda against f for each lambda, nu = 1/(2s).
inline ScalingReport scaling_invariance_check(const PhaseFunction& F, const ModelParams& p, const std::vector<double>& lambdas,
                                              const NormSpec& ns = {}, bool with_fixed = false) {
  ScalingReport rep;
  rep.nu = 1.0 / (2.0 * p.s);
  rep.base = scaling_invariant_functional(F, p, ns).value;
  for (double lam : lambdas) {
    ScalingRow r;
    r.lambda = lam;
    r.value = scaling_invariant_functional(scaled(F, p, lam, rep.nu), p, ns).value;
    r.rel_dev = std::abs(r.value - rep.base) / rep.base;
    rep.rows.push_back(r);
    if (with_fixed) {
      NormSpec fx = ns;
      fx.panel_width = ns.panel_width > 0.0 ? ns.panel_width : F.v_scale;
      ScalingRow q;
      q.lambda = lam;
      q.value = scaling_invariant_functional(scaled(F, p, lam, rep.nu), p, fx).value;
      q.rel_dev = std::abs(q.value - rep.base) / rep.base;
      rep.fixed_rows.push_back(q);
    }
  }
  return rep;
}

/// Truncated norm of f_lambda against f; no invariance is expected.
inline ScalingReport truncated_scaling_report(const PhaseFunction& F, const ModelParams& p, const std::vector<double>& lambdas,
                                              const NormSpec& ns = {}) {
  ScalingReport rep;
  rep.nu = 1.0 / (2.0 * p.s);
  WeightSpec w;
  rep.base = critical_norm(F, p, w, ns).value;
  for (double lam : lambdas) {
    ScalingRow r;
    r.lambda = lam;
    r.value = critical_norm(scaled(F, p, lam, rep.nu), p, w, ns).value;
    r.rel_dev = std::abs(r.value - rep.base) / rep.base;
    rep.rows.push_back(r);
  }
  return rep;
}

// ---- derivatives on the phase grid -------------------------------------------------------------

/// d/dx_k by FFT on the torus.
inline KineticField dx_spectral(const KineticField& f, int k) {
  const PhaseGrid& g = f.grid;
  PhaseFft fft(g);
  auto a = to_complex(f);
  fft.x_forward(a);
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    auto m = PhaseGrid::unflatten(ix, g.nx, g.d);
    double kk = (g.nx % 2 == 0 && m[k] == g.nx / 2) ? 0.0 : g.k_at(ix)(k);
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) a[ix * g.nvs() + iv] *= cplx(0.0, kk);
  }
  fft.x_backward(a);
  return from_complex(g, a);
}

/// d/dv_k by second-order central differences; values outside the v-box are taken as zero.
inline KineticField dv_central(const KineticField& f, int k) {
  const PhaseGrid& g = f.grid;
  KineticField out(g);
  std::size_t stride = PhaseGrid::ipow(g.nv, g.d - 1 - k);
  const double h = g.dv();
  for (std::size_t ix = 0; ix < g.nxs(); ++ix)
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
      int m = static_cast<int>((iv / stride) % g.nv);
      double up = m + 1 < g.nv ? f.at(ix, iv + stride) : 0.0;
      double dn = m > 0 ? f.at(ix, iv - stride) : 0.0;
      out.at(ix, iv) = (up - dn) / (2.0 * h);
    }
  return out;
}

/// |grad_v^m grad_x^n f| (Frobenius norm over all ordered index tuples), m, n <= 2.
inline KineticField derivative_magnitude(const KineticField& f, int m, int n) {
  if (m < 0 || n < 0 || m > 2 || n > 2) throw ValidationError("derivative orders must lie in {0,1,2}");
  const int d = f.grid.d;
  std::vector<KineticField> terms{f};
  for (int i = 0; i < n; ++i) {
    std::vector<KineticField> next;
    for (auto& t : terms)
      for (int k = 0; k < d; ++k) next.push_back(dx_spectral(t, k));
    terms.swap(next);
  }
  for (int i = 0; i < m; ++i) {
    std::vector<KineticField> next;
    for (auto& t : terms)
      for (int k = 0; k < d; ++k) next.push_back(dv_central(t, k));
    terms.swap(next);
  }
  KineticField out(f.grid);
  for (auto& t : terms)
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += t.data[i] * t.data[i];
  for (double& a : out.data) a = std::sqrt(a);
  return out;
}

/// ||f(t)||_{Y_{m,n}} = sup w_1 t^n tilde_t_v^{(d-kappa+m+n)/2s} |grad_v^m grad_x^n f|, with tilde_t_v = <v>^gamma t.
inline double y_norm(const KineticField& f, const ModelParams& p, double t, int m, int n, const WeightSpec& w) {
  if (!(t > 0.0)) throw ValidationError("y_norm: t must be positive");
  KineticField D = derivative_magnitude(f, m, n);
  const PhaseGrid& g = f.grid;
  const double ex = (p.d - p.kappa() + m + n) / (2.0 * p.s);
  double best = 0.0;
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    Vec x = g.x_at(ix);
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
      Vec v = g.v_at(iv);
      double tt = time_scales(p, t, v.norm()).tilde_t;
      best = std::max(best, w(x, v) * std::pow(t, n) * std::pow(tt, ex) * D.at(ix, iv));
    }
  }
  return best;
}

/// Z-type monitor: sup w_1 t^n tilde_t_v^{(m+n)/2s} I(|grad_v^m grad_x^n f|).
inline double z_norm(const KineticField& f, const ModelParams& p, double t, int m, int n, const WeightSpec& w,
                     const NormSpec& ns = {}) {
  if (!(t > 0.0)) throw ValidationError("z_norm: t must be positive");
  KineticField D = derivative_magnitude(f, m, n);
  const PhaseGrid& g = f.grid;
  if (D.max_abs() == 0.0) return 0.0;
  BallMaxField M(D);
  const double ex = (m + n) / (2.0 * p.s);
  double best = 0.0;
  const int sx = std::max(1, ns.lattice_stride_x), sv = std::max(1, ns.lattice_stride_v);
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    auto mx = PhaseGrid::unflatten(ix, g.nx, g.d);
    bool keep = true;
    for (int k = 0; k < g.d; ++k) keep = keep && mx[k] % sx == 0;
    if (!keep) continue;
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
      auto mv = PhaseGrid::unflatten(iv, g.nv, g.d);
      bool kv = true;
      for (int k = 0; k < g.d; ++k) kv = kv && mv[k] % sv == 0;
      if (!kv || M.at(ix, iv) == 0.0) continue;
      Vec v = g.v_at(iv);
      double tt = time_scales(p, t, v.norm()).tilde_t;
      best = std::max(best, w(g.x_at(ix), v) * std::pow(t, n) * std::pow(tt, ex) * riesz_I(M, ix, v, p, ns).value);
    }
  }
  return best;
}

}  // namespace kk

#pragma once

// Property-based acceptance suite. Every check is deterministic; quick mode lowers resolution
// where the thresholds still hold and otherwise keeps the reference setup.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "collision.hpp"
#include "kernels.hpp"
#include "landau_grid.hpp"
#include "norms.hpp"
#include "semigroup.hpp"
#include "solver.hpp"

namespace kk {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  bool quick = false;
  std::vector<int> only;  // empty runs all
};

namespace acceptance {

struct Outcome {
  bool pass = false;
  std::string detail;
};

inline std::string fmt(const char* f, auto... a) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

inline double rel_change(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

// 1. closed-form Landau kernel against the Fourier inversion of exp(-int E)
inline Outcome kernel_fourier(bool) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  FourierKernelSpec sp;
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string det;
  for (double r : {0.0, 2.0}) {
    Vec v0 = vec({r * std::cos(0.7), r * std::sin(0.7)});
    KernelEval K = fourier_kernel(m, 0.5, v0, sp);
    LandauKernel L(m, 0.5, v0);
    const int n = K.n[0];
    double err = 0.0, mx = 0.0;
    for (std::size_t i = 0; i < K.values.size(); ++i) {
      std::size_t rem = i;
      std::vector<double> y(4);
      for (int a = 3; a >= 0; --a, rem /= n) y[a] = K.coord(a, static_cast<int>(rem % n));
      double h = L.frame_value(vec({y[0], y[1]}), vec({y[2], y[3]}));
      err = std::max(err, std::abs(h - K.values[i]));
      mx = std::max(mx, h);
    }
    worst = std::max(worst, err / mx);
    det += fmt("|v0|=%g rel_linf=%.3e (n=%d^4) ", r, err / mx, n);
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  det += fmt("runtime=%.1fs", secs);
  return {worst < 1e-3 && secs < 120.0, det};
}

// 2. total mass of the kernel
inline Outcome kernel_mass(bool quick) {
  Multiplier m1(ModelParams::make(2, 1.0, -3.0));
  FourierKernelSpec sp;
  if (quick) sp.n = 48;
  KernelEval K1 = fourier_kernel(m1, 0.5, vec({0.0, 2.0}), sp);
  double e1 = std::abs(K1.mass - 1.0);
  Multiplier mh(ModelParams::make(2, 0.5, -2.0));
  KernelEval Kh = kernel_v_marginal(mh, 0.5, vec({0.0, 2.0}));
  double eh = std::abs(Kh.mass - 1.0);
  double tol = Kh.tolerance() + Kh.neg_mass;
  return {e1 < 1e-8 && eh <= tol && tol <= 1e-4,
          fmt("s=1 |mass-1|=%.2e; s=0.5 |mass-1|=%.2e reported_tol=%.2e", e1, eh, tol)};
}

// 3. S(t1+t2) = S(t1) S(t2)
inline Outcome semigroup_property(bool quick) {
  std::string det;
  bool ok = true;
  for (double s : {1.0, 0.5}) {
    Multiplier m(ModelParams::make(2, s, s == 1.0 ? -3.0 : -2.0));
    PhaseGrid g;
    g.d = 2;
    g.nx = 8;
    g.nv = quick ? 48 : 64;
    g.V = 12.0;
    auto f0 = KineticField::sample(g, [](const Vec& x, const Vec& v) {
      return std::exp(-0.5 * v.squaredNorm()) * (1.0 + 0.3 * std::cos(x(0)) + 0.2 * std::sin(x(0) + 2.0 * x(1)));
    });
    LinearSemigroup S(m, g, vec({1.2, 1.6}));
    double e = rel_l2(S.apply(f0, 0.25), S.apply(S.apply(f0, 0.15), 0.1));
    double tol = s == 1.0 ? 1e-9 : 1e-4;
    ok = ok && e < tol;
    det += fmt("s=%g rel_l2=%.2e (tol %.0e) ", s, e, tol);
  }
  return {ok, det};
}

// 4. Gaussian sandwich with searched exponents
inline Outcome sandwich(bool quick) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  int n = quick ? 2000 : 4000;
  SandwichReport r = gaussian_sandwich(m, {0.1, 0.5}, {0.0, 1.0, 4.0}, n, n);
  bool ok = r.lower >= 1.0 / 50.0 && r.upper <= 50.0 && r.max_rel_change < 0.1;
  return {ok, fmt("c1=%.4f c2=%.4f envelope=[%.4f, %.4f] refinement_change=%.2e", r.c1, r.c2, r.lower, r.upper,
                  r.max_rel_change)};
}

// 5. weighted sup of the fractional Kolmogorov kernel
inline Outcome kolmogorov_bound(bool quick) {
  KolmogorovSpec base, fine;
  base.lambda_cut = 10.0;
  fine.lambda_cut = quick ? 10.0 : 12.0;
  KolmogorovKernel K0(2, 0.5, base);
  KolmogorovBound a = kolmogorov_bound_sweep(K0, 21, 4.0);
  KolmogorovBound b;
  if (quick) {
    b = kolmogorov_bound_sweep(K0, 41, 4.0);
  } else {
    KolmogorovKernel K1(2, 0.5, fine);
    b = kolmogorov_bound_sweep(K1, 41, 4.0);
  }
  double ch = rel_change(a.sup, b.sup);
  bool ok = std::isfinite(a.sup) && std::isfinite(b.sup) && ch < 0.1;
  return {ok, fmt("sup(21^4, cut %.0f)=%.6g sup(41^4, cut %.0f)=%.6g change=%.2e", base.lambda_cut, a.sup,
                  fine.lambda_cut, b.sup, ch)};
}

// 6. frak_c(a) ~ (1+a)^{1-kappa}
inline Outcome frak_c_check(bool quick) {
  bool ok = true;
  std::string det;
  QuadratureSpec q;
  for (double k : {0.5, 1.5, 2.5}) {
    auto p = ModelParams::make(3, 0.5, -k - 1.0);
    Multiplier m(p, q), mr(p, q.refined());
    int n = quick ? 30 : 60;
    EquivalenceRange a = frak_c_equivalence(m, 50.0, n), b = frak_c_equivalence(mr, 50.0, 2 * n);
    double e0 = std::abs(m.frak_c_direct(0.0) / m.frak_c0_closed() - 1.0);
    double ch = std::max(rel_change(a.lo, b.lo), rel_change(a.hi, b.hi));
    ok = ok && a.finite() && a.spread() < 100.0 && e0 < 1e-8 && ch < 0.1;
    det += fmt("kappa=%g [%.4f, %.4f] spread=%.2f c(0)_err=%.1e refine=%.1e; ", k, a.lo, a.hi, a.spread(), e0, ch);
  }
  return {ok, det};
}

// 7. E^s(z, v0) against <v0>^{-kappa} [[z]]^{2s} min{1, [[z]]}^{2-2s}
inline Outcome symbol_check(bool quick) {
  bool ok = true;
  std::string det;
  for (double s : {0.5, 1.0}) {
    Multiplier m(ModelParams::make(2, s, s == 1.0 ? -3.0 : -2.0));
    int nr = quick ? 11 : 21, na = quick ? 9 : 17;
    EquivalenceRange a = symbol_equivalence(m, {0.0, 2.0, 8.0}, nr, na);
    EquivalenceRange b = symbol_equivalence(m, {0.0, 2.0, 8.0}, 2 * nr - 1, 2 * na - 1);
    double ch = std::max(rel_change(a.lo, b.lo), rel_change(a.hi, b.hi));
    ok = ok && a.finite() && a.spread() < 100.0 && ch < 0.1;
    det += fmt("s=%g [%.4f, %.4f] spread=%.2f refine=%.1e; ", s, a.lo, a.hi, a.spread(), ch);
  }
  return {ok, det};
}

// 8. moments of Q(f, f) and the Maxwellian equilibrium
inline Outcome conservation(bool quick) {
  Multiplier m(ModelParams::make(2, 0.5, -1.5));
  CarlemanOperator op(m);
  const double h = 0.4, L = 5.6;
  std::vector<unsigned> seeds = quick ? std::vector<unsigned>{7} : std::vector<unsigned>{7, 11, 23};
  bool ok = true;
  std::string det;
  for (unsigned seed : seeds) {
    ConservationReport c = conservation_check(op, random_smooth_field(2, seed), h, L);
    ok = ok && c.max_rel() < 1e-6;
    det += fmt("seed %u rel=%.2e edge=%.1e; ", seed, c.max_rel(), c.edge);
  }
  double eq = maxwellian_equilibrium_residual(op, {vec({0.3, -0.4}), vec({1.2, 0.5}), vec({-2.0, 1.0})});
  ok = ok && eq < 1e-7;
  det += fmt("Q(mu,mu)/|Q_main(mu,mu)|=%.2e", eq);
  return {ok, det};
}

// 9. K(f) = c Lambda^{-d-gamma} f
inline Outcome cancellation(bool quick) {
  Multiplier m(ModelParams::make(2, 0.5, -1.5));
  CarlemanOperator op(m);
  Vec c = vec({0.3, -0.2});
  const double sig = 0.8;
  VFunction f = gaussian_fn(c, sig, 1.0);
  int n = quick ? 4 : 7;
  double kr = 0.0, rr = 0.0, kk = 0.0;
  std::vector<double> K, R;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec v = vec({-3.0 + 6.0 * i / (n - 1), -3.0 + 6.0 * j / (n - 1)});
      K.push_back(op.K(f, v));
      R.push_back(riesz_gaussian(c, sig, 1.0, 0.5, v));
      kr += K.back() * R.back();
      rr += R.back() * R.back();
      kk += K.back() * K.back();
    }
  double cf = kr / rr, res = 0.0;
  for (std::size_t i = 0; i < K.size(); ++i) res += std::pow(K[i] - cf * R[i], 2);
  res = std::sqrt(res / kk);
  return {res < 1e-2 && cf > 0.0, fmt("c=%.10g relative residual=%.2e over %d points", cf, res, n * n)};
}

// 10. (1-s) Q_s -> c Q_1
inline Outcome grazing(bool quick) {
  VFunction f1 = gaussian_fn(vec({0.2, -0.1}), 0.9, 1.0), f2 = gaussian_fn(vec({-0.3, 0.2}), 0.7, 0.8);
  int n = quick ? 3 : 4;
  std::vector<Vec> vs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) vs.push_back(vec({-1.2 + 2.4 * i / (n - 1), -1.2 + 2.4 * j / (n - 1)}));
  CollisionSpec sp;
  sp.trunc = 7.0;
  GrazingReport g = grazing_limit_check(2, -2.5, f1, f2, {0.9, 0.95, 0.99}, vs, sp);
  std::string det;
  for (auto& r : g.rows) det += fmt("s=%g c=%.4f res=%.2e; ", r.s, r.c_fit, r.residual);
  det += fmt("c spread=%.3f", g.c_spread());
  return {g.strictly_decreasing() && g.c_spread() < 0.2, det};
}

// 11. scaling invariance of the untruncated critical functional
inline Outcome scaling(bool quick) {
  auto p = ModelParams::make(2, 0.5, -2.8);
  PhaseFunction F = phase_gaussian(vec({0.2, -0.1}), 1.0, vec({0.3, -0.2}), 0.8, 1.0);
  ScalingReport r = scaling_invariance_check(F, p, {0.5, 2.0}, NormSpec{}, !quick);
  double dev = r.max_dev();
  std::string det = fmt("nu=%g base=%.12f ", r.nu, r.base);
  for (auto& row : r.rows) det += fmt("lambda=%g dev=%.1e ", row.lambda, row.rel_dev);
  for (auto& row : r.fixed_rows) {
    det += fmt("fixed-panel lambda=%g dev=%.1e ", row.lambda, row.rel_dev);
    dev = std::max(dev, row.rel_dev);
  }
  return {dev < 1e-6, det};
}

// 12. Picard iteration on the torus
inline Outcome picard(bool) {
  auto P = ModelParams::make(2, 1.0, -3.0);
  Multiplier m(P);
  PhaseGrid g;
  g.d = 2;
  g.nx = 8;
  g.nv = 32;
  g.V = 6.0;
  KineticField f0 = gaussian_bump_data(g, 1e-3);
  SolverConfig cfg;
  SolutionTrace tr = picard_solve(f0, m, cfg);
  SolutionTrace im = imex_reference(f0, m, cfg);
  double rmax = 0.0;
  for (double r : tr.ratios) rmax = std::max(rmax, r);
  double diff = rel_l2(tr.final_field(), im.final_field());
  double mn = 1e300, drift = 0.0;
  for (double v : tr.min_mu_f_history) mn = std::min(mn, v);
  for (auto& row : monitors(tr, P, cfg.weights, false)) {
    mn = std::min(mn, row.min_mu_f);
    drift = std::max(drift, row.drift);
  }
  bool ok = tr.status == SolveStatus::Converged && !tr.ratios.empty() && rmax < 0.5 && diff < 1e-2 && mn >= -1e-8 &&
            drift < 1e-5;
  return {ok, fmt("%s in %d iterations, max ratio=%.3f, vs imex rel_l2=%.2e, min(mu+f)=%.2e, drift=%.2e",
                  status_name(tr.status), tr.iterations, rmax, diff, mn, drift)};
}

// 13. L = L^{v0} - R^{v0}
inline Outcome splitting(bool) {
  std::vector<Vec> v0s{vec({0.5, -0.3}), vec({2.0, 1.0})};
  double worst = 0.0;
  std::string det;
  {
    Multiplier m(ModelParams::make(2, 0.5, -2.0));
    CarlemanOperator op(m);
    for (unsigned seed : {3u, 5u}) {
      VFunction f = random_smooth_field(2, seed);
      for (const Vec& v0 : v0s) {
        double e = 0.0, sc = 0.0;
        for (const Vec& v : {vec({0.1, 0.2}), vec({1.3, -0.8}), vec({-0.9, 1.7})}) {
          double loc = op.dominated(f, v, Coefficient::Local, v0);
          double rhs = op.dominated(f, v, Coefficient::Frozen, v0) - op.dominated(f, v, Coefficient::Difference, v0);
          e = std::max(e, std::abs(loc - rhs));
          sc = std::max(sc, std::abs(loc));
        }
        worst = std::max(worst, e / sc);
      }
    }
    det += fmt("s=0.5 rel=%.1e; ", worst);
  }
  {
    Multiplier m(ModelParams::make(2, 1.0, -3.0));
    PhaseGrid g;
    g.d = 2;
    g.nx = 1;
    g.nv = 32;
    g.V = 6.0;
    LandauGrid L(m, g);
    double w1 = 0.0;
    std::mt19937 rng(13);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    for (int trial = 0; trial < 2; ++trial) {
      Vec c = vec({U(rng), U(rng)});
      double a = 0.5 + 0.5 * std::abs(U(rng));
      std::vector<double> f(g.nvs());
      for (std::size_t iv = 0; iv < g.nvs(); ++iv) f[iv] = std::exp(-(g.v_at(iv) - c).squaredNorm() / (2.0 * a * a));
      auto lhs = L.dominated(f);
      for (const Vec& v0 : v0s) {
        auto fr = L.frozen(f, v0), re = L.remainder(f, v0);
        double e = 0.0, sc = 0.0;
        for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
          e = std::max(e, std::abs(lhs[iv] - (fr[iv] - re[iv])));
          sc = std::max(sc, std::abs(lhs[iv]));
        }
        w1 = std::max(w1, e / sc);
      }
    }
    det += fmt("s=1 rel=%.1e", w1);
    worst = std::max(worst, w1);
  }
  return {worst < 1e-12, det};
}

struct Entry {
  int id;
  const char* name;
  Outcome (*run)(bool);
};

inline const std::vector<Entry>& registry() {
  static const std::vector<Entry> r{
      {1, "landau kernel closed form vs fourier inversion", kernel_fourier},
      {2, "kernel normalization", kernel_mass},
      {3, "semigroup property", semigroup_property},
      {4, "gaussian sandwich", sandwich},
      {5, "kolmogorov weighted sup bound", kolmogorov_bound},
      {6, "frak_c equivalence", frak_c_check},
      {7, "symbol equivalence", symbol_check},
      {8, "conservation", conservation},
      {9, "cancellation identity", cancellation},
      {10, "grazing limit", grazing},
      {11, "scaling invariance", scaling},
      {12, "picard contraction", picard},
      {13, "splitting exactness", splitting},
  };
  return r;
}

}  // namespace acceptance

inline std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt,
                                                   const std::function<void(const CriterionResult&)>& on_result = {}) {
  std::vector<CriterionResult> out;
  for (const auto& e : acceptance::registry()) {
    if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), e.id) == opt.only.end()) continue;
    CriterionResult r;
    r.id = e.id;
    r.name = e.name;
    auto t0 = std::chrono::steady_clock::now();
    try {
      acceptance::Outcome o = e.run(opt.quick);
      r.pass = o.pass;
      r.detail = o.detail;
    } catch (const std::exception& ex) {
      r.pass = false;
      r.detail = std::string("error: ") + ex.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_result) on_result(r);
    out.push_back(r);
  }
  return out;
}

inline std::string format_result(const CriterionResult& r) {
  return acceptance::fmt("[%s] %2d %s: %s (%.1fs)", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str(),
                         r.seconds);
}

}  // namespace kk

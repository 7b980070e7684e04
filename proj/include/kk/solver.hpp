#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "field.hpp"
#include "landau_grid.hpp"
#include "multiplier.hpp"
#include "norms.hpp"
#include "semigroup.hpp"

namespace kk {

struct SolverConfig {
  double T = 0.1;
  V0Strategy strategy = V0Strategy::Fixed;
  Vec v0;                    // fixed frame velocity; empty means 0
  int max_iter = 30;
  double tol = 1e-10;        // stop when the successive difference is below tol * sup|w_1 f0|
  int time_steps = 10;       // Picard time mesh intervals on [0, T]
  int tau_nodes = 4;         // Gauss-Legendre nodes per mesh interval in the Duhamel sum
  double imex_dt = 2.5e-3;
  int monitor_every = 1;
  double tol_pos = 1e-8;     // positivity tolerance relative to max mu
  bool nonlinear = true;     // false drops Q(f, f) from the forcing
  bool collisions = true;    // false solves the frozen linear problem only
  WeightSpec weights;

  void validate(const PhaseGrid& g) const {
    if (!(T > 0.0)) throw ValidationError("solver.T must be positive");
    if (!(tol > 0.0)) throw ValidationError("solver.tol must be positive");
    if (max_iter < 1 || time_steps < 1 || tau_nodes < 1) throw ValidationError("solver iteration counts must be positive");
    if (!(imex_dt > 0.0)) throw ValidationError("solver.imex_dt must be positive");
    weights.validate();
    double kmax = 2.0 * std::numbers::pi / g.Lx * (g.nx / 2);
    if (T * kmax >= std::numbers::pi / g.dv())
      throw ValidationError("grid Nyquist is insufficient for the shear eta - T k over [0, T]");
  }
  Vec frame(int d) const { return v0.size() == d ? v0 : Vec(Vec::Zero(d)); }
};

enum class SolveStatus { Converged, MaxIterations, Diverged, PositivityViolation };

inline const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::Diverged: return "diverged";
    case SolveStatus::PositivityViolation: return "positivity_violation";
  }
  return "?";
}

struct MonitorRow {
  double t = 0.0;
  double min_mu_f = 0.0;
  double drift = 0.0;  // max |m(t) - m(0)| over mass, momentum, energy
  double y00 = 0.0, y10 = 0.0, y01 = 0.0;
};

struct SolutionTrace {
  std::string method;
  std::vector<double> times;
  std::vector<KineticField> fields;
  std::vector<double> residuals;  // sup of w_1 |f^{n} - f^{n-1}| over the time mesh
  std::vector<double> ratios;     // residuals[n] / residuals[n-1]
  std::vector<double> min_mu_f_history;  // per Picard iterate (or per IMEX step)
  SolveStatus status = SolveStatus::Converged;
  int iterations = 0;
  std::string message;

  const KineticField& final_field() const { return fields.back(); }
};

inline std::vector<double> maxwellian_values(const PhaseGrid& g) {
  std::vector<double> mu(g.nvs());
  for (std::size_t iv = 0; iv < g.nvs(); ++iv)
    mu[iv] = std::pow(2.0 * std::numbers::pi, -0.5 * g.d) * std::exp(-0.5 * g.v_at(iv).squaredNorm());
  return mu;
}

inline double min_mu_plus_f(const KineticField& f, const std::vector<double>& mu) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t ix = 0; ix < f.grid.nxs(); ++ix)
    for (std::size_t iv = 0; iv < f.grid.nvs(); ++iv) m = std::min(m, mu[iv] + f.at(ix, iv));
  return m;
}

inline double weighted_sup(const KineticField& f, const WeightSpec& w) {
  const PhaseGrid& g = f.grid;
  if (w.varkappa1 == 0.0 && w.varkappa2 == 0.0) return f.max_abs();
  double m = 0.0;
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    Vec x = g.x_at(ix);
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) m = std::max(m, w(x, g.v_at(iv)) * std::abs(f.at(ix, iv)));
  }
  return m;
}

/// The right-hand side pieces of d_t f + v.grad_x f + L^{v0} f = G(f) + R^{v0} f for s = 1.
class LandauForcing {
 public:
  LandauForcing(const Multiplier& m, const PhaseGrid& g, const Vec& v0, bool nonlinear, bool collisions)
      : L_(m, g), v0_(v0), nonlinear_(nonlinear), collisions_(collisions) {}

  const LandauGrid& landau() const { return L_; }

  KineticField operator()(const KineticField& f) const {
    if (!collisions_) return KineticField(f.grid);
    return L_.map(f, [&](const LandauGrid::Slice& s) {
      LandauGrid::Slice out = L_.lower_order(s);
      LandauGrid::Slice r = L_.remainder(s, v0_);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] += r[i];
      if (nonlinear_) {
        auto n = L_.q(s, s);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += n.main[i] + n.rem[i];
      }
      return out;
    });
  }

  /// L^{v0} f by the spectral Hessian
  KineticField frozen(const KineticField& f) const {
    return L_.map(f, [&](const LandauGrid::Slice& s) { return L_.frozen(s, v0_); });
  }

 private:
  LandauGrid L_;
  Vec v0_;
  bool nonlinear_, collisions_;
};

namespace detail {

/// 4-point Lagrange weights for the mesh values at fractional position u (in steps), stencil clamped to [0, N].
inline std::pair<int, std::array<double, 4>> lagrange4(double u, int N) {
  int j0 = std::clamp(static_cast<int>(std::floor(u)) - 1, 0, std::max(0, N - 3));
  std::array<double, 4> w{0, 0, 0, 0};
  int m = std::min(4, N + 1);
  for (int a = 0; a < m; ++a) {
    double l = 1.0;
    for (int b = 0; b < m; ++b)
      if (b != a) l *= (u - (j0 + b)) / static_cast<double>(a - b);
    w[a] = l;
  }
  return {j0, w};
}

}  // namespace detail

/// Picard iteration f^{n+1}(t) = S(t) f0 + int_0^t S(t - tau) [G(f^n) + R^{v0} f^n](tau) d tau on a uniform time mesh,
/// with the forcing interpolated in tau by local cubics. S is the exact frozen-coefficient semigroup (s = 1, fixed v0).
inline SolutionTrace picard_solve(const KineticField& f0, const Multiplier& m, const SolverConfig& cfg) {
  const PhaseGrid& g = f0.grid;
  cfg.validate(g);
  if (m.params().s != 1.0) throw ValidationError("picard_solve: the exact remainder is implemented for s = 1");
  if (cfg.strategy != V0Strategy::Fixed)
    throw ValidationError("picard_solve: the exact splitting L = L^{v0} - R^{v0} needs a fixed v0");
  const Vec v0 = cfg.frame(g.d);
  const std::vector<double> mu = maxwellian_values(g);
  const double maxmu = *std::max_element(mu.begin(), mu.end());
  if (min_mu_plus_f(f0, mu) < -cfg.tol_pos * maxmu) throw ValidationError("picard_solve: f0 + mu must be nonnegative");

  LinearSemigroup S(m, g, v0, V0Strategy::Fixed);
  LandauForcing G(m, g, v0, cfg.nonlinear, cfg.collisions);
  const int N = cfg.time_steps;
  const double dt = cfg.T / N;

  SolutionTrace tr;
  tr.method = "picard";
  for (int i = 0; i <= N; ++i) tr.times.push_back(i * dt);
  std::vector<KineticField> lin(N + 1);
  lin[0] = f0;
  for (int i = 1; i <= N; ++i) lin[i] = S.apply(lin[i - 1], dt);
  std::vector<KineticField> f = lin;

  const Rule& gl = gauss_legendre(cfg.tau_nodes);
  const double scale = std::max(weighted_sup(f0, cfg.weights), std::numeric_limits<double>::min());
  int above = 0;
  tr.status = SolveStatus::MaxIterations;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    // forcing on the mesh, computed once per iterate and shared by all target times
    std::vector<KineticField> F(N + 1);
    for (int i = 0; i <= N; ++i) F[i] = G(f[i]);
    // D_i = S(dt) D_{i-1} + int_{t_{i-1}}^{t_i} S(t_i - tau) F(tau) d tau
    std::vector<KineticField> next(N + 1);
    next[0] = f0;
    KineticField D(g);
    for (int i = 1; i <= N; ++i) {
      KineticField acc = S.apply(D, dt);
      for (std::size_t q = 0; q < gl.x.size(); ++q) {
        double u = (i - 1) + 0.5 * (gl.x[q] + 1.0);  // tau / dt
        auto [j0, w] = detail::lagrange4(u, N);
        KineticField Fq(g);
        for (int a = 0; a < 4 && j0 + a <= N; ++a)
          for (std::size_t k = 0; k < Fq.data.size(); ++k) Fq.data[k] += w[a] * F[j0 + a].data[k];
        KineticField Sq = S.apply(Fq, dt * (i - u));
        double wq = 0.5 * gl.w[q] * dt;
        for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += wq * Sq.data[k];
      }
      D = acc;
      next[i] = lin[i] + D;
    }
    double res = 0.0, mn = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= N; ++i) {
      res = std::max(res, weighted_sup(next[i] - f[i], cfg.weights));
      mn = std::min(mn, min_mu_plus_f(next[i], mu));
    }
    f.swap(next);
    tr.iterations = it;
    tr.residuals.push_back(res);
    tr.min_mu_f_history.push_back(mn);
    if (tr.residuals.size() >= 2) {
      double prev = tr.residuals[tr.residuals.size() - 2];
      tr.ratios.push_back(prev > 0 ? res / prev : 0.0);
      above = tr.ratios.back() >= 1.0 ? above + 1 : 0;
    }
    if (mn < -cfg.tol_pos * maxmu) {
      tr.status = SolveStatus::PositivityViolation;
      tr.message = "min(mu + f) fell below the positivity tolerance";
      break;
    }
    if (above >= 3) {
      tr.status = SolveStatus::Diverged;
      tr.message = "contraction ratio >= 1 for 3 consecutive iterations";
      break;
    }
    if (res <= cfg.tol * scale) {
      tr.status = SolveStatus::Converged;
      break;
    }
  }
  tr.fields = std::move(f);
  return tr;
}

/// Method-of-lines reference: Strang splitting of exact transport around an IMEX step for
/// d_t f = -L^{v0} f + N(f), with L^{v0} by Crank-Nicolson in the v-Fourier variable and N explicit (Heun).
inline SolutionTrace imex_reference(const KineticField& f0, const Multiplier& m, const SolverConfig& cfg) {
  const PhaseGrid& g = f0.grid;
  cfg.validate(g);
  if (m.params().s != 1.0) throw ValidationError("imex_reference: implemented for the Landau case s = 1");
  if (cfg.strategy != V0Strategy::Fixed) throw ValidationError("imex_reference: requires a fixed v0");
  const Vec v0 = cfg.frame(g.d);
  const Mat A0 = m.landau_matrix(v0);
  const std::vector<double> mu = maxwellian_values(g);
  const double maxmu = *std::max_element(mu.begin(), mu.end());
  LandauForcing G(m, g, v0, cfg.nonlinear, cfg.collisions);
  PhaseFft fft(g);
  const int steps = std::max(1, static_cast<int>(std::ceil(cfg.T / cfg.imex_dt - 1e-9)));
  const double dt = cfg.T / steps;
  // symbol of L^{v0}: eta . A0 eta (Nyquist modes follow the spectral Hessian convention of LandauGrid)
  std::vector<double> E(g.nvs());
  for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
    Vec eta = g.eta_at(iv);
    E[iv] = eta.dot(A0 * eta);
  }
  auto cn = [&](const KineticField& a, const KineticField& rhs) {
    // (1 + dt/2 E)^{-1} [(1 - dt/2 E) a^ + dt rhs^]
    auto x = to_complex(a);
    auto r = to_complex(rhs);
    fft.v_forward(x);
    fft.v_forward(r);
    for (std::size_t ix = 0; ix < g.nxs(); ++ix)
      for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
        std::size_t k = ix * g.nvs() + iv;
        double e = 0.5 * dt * E[iv];
        x[k] = ((1.0 - e) * x[k] + dt * r[k]) / (1.0 + e);
      }
    fft.v_backward(x);
    return from_complex(g, x);
  };
  SolutionTrace tr;
  tr.method = "imex";
  KineticField f = f0;
  tr.times.push_back(0.0);
  tr.fields.push_back(f);
  for (int n = 1; n <= steps; ++n) {
    f = free_transport(f, 0.5 * dt);
    KineticField N0 = G(f);
    KineticField pred = cn(f, N0);
    KineticField mid = 0.5 * (f + pred);
    f = cn(f, G(mid));
    f = free_transport(f, 0.5 * dt);
    double mn = min_mu_plus_f(f, mu);
    tr.min_mu_f_history.push_back(mn);
    if (n % std::max(1, cfg.monitor_every) == 0 || n == steps) {
      tr.times.push_back(n * dt);
      tr.fields.push_back(f);
    }
    if (mn < -cfg.tol_pos * maxmu) {
      tr.status = SolveStatus::PositivityViolation;
      tr.message = "min(mu + f) fell below the positivity tolerance";
      break;
    }
  }
  tr.iterations = steps;
  return tr;
}

/// Per-time monitors of a trace: min(mu + f), moment drift, Y_{0,0}, Y_{1,0}, Y_{0,1}.
inline std::vector<MonitorRow> monitors(const SolutionTrace& tr, const ModelParams& p, const WeightSpec& w, bool with_y = true) {
  std::vector<MonitorRow> out;
  if (tr.fields.empty()) return out;
  const std::vector<double> mu = maxwellian_values(tr.fields[0].grid);
  Moments m0 = tr.fields[0].moments();
  for (std::size_t i = 0; i < tr.fields.size(); ++i) {
    MonitorRow r;
    r.t = tr.times[i];
    r.min_mu_f = min_mu_plus_f(tr.fields[i], mu);
    r.drift = tr.fields[i].moments().max_abs_diff(m0);
    if (with_y && r.t > 0.0) {
      r.y00 = y_norm(tr.fields[i], p, r.t, 0, 0, w);
      r.y10 = y_norm(tr.fields[i], p, r.t, 1, 0, w);
      r.y01 = y_norm(tr.fields[i], p, r.t, 0, 1, w);
    }
    out.push_back(r);
  }
  return out;
}

/// Gaussian-bump perturbation amp (1 + cos x_1 / 2) exp(-|v - c|^2 / (2 sigma^2)), normalized to weighted sup amp.
inline KineticField gaussian_bump_data(const PhaseGrid& g, double amp, double sigma = 0.7, const Vec& c = Vec(),
                                       const WeightSpec& w = {}) {
  Vec cc = c.size() == g.d ? c : Vec(Vec::Zero(g.d));
  KineticField f = KineticField::sample(g, [&](const Vec& x, const Vec& v) {
    return (1.0 + 0.5 * std::cos(x(0))) * std::exp(-0.5 * (v - cc).squaredNorm() / (sigma * sigma));
  });
  double s = weighted_sup(f, w);
  if (s > 0) f *= amp / s;
  return f;
}

}  // namespace kk

#pragma once

#include <fftw3.h>

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <tuple>
#include <vector>

#include "fft.hpp"
#include "field.hpp"
#include "multiplier.hpp"

namespace kk {

/// Partial FFTs on a phase-space buffer laid out as data[ix * nvs + iv].
class PhaseFft {
 public:
  explicit PhaseFft(const PhaseGrid& g) : g_(g) {
    std::vector<int> nx(g.d, g.nx), nv(g.d, g.nv);
    std::vector<cplx> tmp(g.size());
    auto* p = reinterpret_cast<fftw_complex*>(tmp.data());
    int nxs = static_cast<int>(g.nxs()), nvs = static_cast<int>(g.nvs());
    unsigned fl = FFTW_ESTIMATE | FFTW_UNALIGNED;
    vf_ = fftw_plan_many_dft(g.d, nv.data(), nxs, p, nullptr, 1, nvs, p, nullptr, 1, nvs, FFTW_FORWARD, fl);
    vb_ = fftw_plan_many_dft(g.d, nv.data(), nxs, p, nullptr, 1, nvs, p, nullptr, 1, nvs, FFTW_BACKWARD, fl);
    xf_ = fftw_plan_many_dft(g.d, nx.data(), nvs, p, nullptr, nvs, 1, p, nullptr, nvs, 1, FFTW_FORWARD, fl);
    xb_ = fftw_plan_many_dft(g.d, nx.data(), nvs, p, nullptr, nvs, 1, p, nullptr, nvs, 1, FFTW_BACKWARD, fl);
    if (!vf_ || !vb_ || !xf_ || !xb_) throw NumericalError("FFTW plan creation failed");
  }
  PhaseFft(const PhaseFft&) = delete;
  PhaseFft& operator=(const PhaseFft&) = delete;
  ~PhaseFft() {
    for (auto pl : {vf_, vb_, xf_, xb_}) fftw_destroy_plan(pl);
  }

  void v_forward(std::vector<cplx>& a) const { run(vf_, a, 1.0); }
  void v_backward(std::vector<cplx>& a) const { run(vb_, a, 1.0 / static_cast<double>(g_.nvs())); }
  void x_forward(std::vector<cplx>& a) const { run(xf_, a, 1.0); }
  void x_backward(std::vector<cplx>& a) const { run(xb_, a, 1.0 / static_cast<double>(g_.nxs())); }

 private:
  static void run(fftw_plan pl, std::vector<cplx>& a, double scale) {
    auto* p = reinterpret_cast<fftw_complex*>(a.data());
    fftw_execute_dft(pl, p, p);
    if (scale != 1.0)
      for (auto& z : a) z *= scale;
  }
  PhaseGrid g_;
  fftw_plan vf_ = nullptr, vb_ = nullptr, xf_ = nullptr, xb_ = nullptr;
};

inline std::vector<cplx> to_complex(const KineticField& f) {
  return std::vector<cplx>(f.data.begin(), f.data.end());
}

inline KineticField from_complex(const PhaseGrid& g, const std::vector<cplx>& a) {
  KineticField f(g);
  for (std::size_t i = 0; i < a.size(); ++i) f.data[i] = a[i].real();
  return f;
}

/// Multiply the x-transformed buffer by exp(-i t k.v).
inline void apply_shear_phase(const PhaseGrid& g, std::vector<cplx>& a, double t) {
  const std::size_t nvs = g.nvs();
  std::vector<Vec> vs(nvs);
  for (std::size_t iv = 0; iv < nvs; ++iv) vs[iv] = g.v_at(iv);
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    Vec k = g.k_at(ix);
    if (k.squaredNorm() == 0.0) continue;
    for (std::size_t iv = 0; iv < nvs; ++iv) a[ix * nvs + iv] *= std::polar(1.0, -t * k.dot(vs[iv]));
  }
}

/// f(x - t v, v) by an exact phase shift per x-mode.
inline KineticField free_transport(const KineticField& f, double t) {
  if (t == 0.0) return f;
  PhaseFft fft(f.grid);
  auto a = to_complex(f);
  fft.x_forward(a);
  apply_shear_phase(f.grid, a, t);
  fft.x_backward(a);
  return from_complex(f.grid, a);
}

enum class V0Strategy { Fixed, FrozenAtPoint };

struct SemigroupDiagnostics {
  double shear_ratio = 0.0;  // t max|k| / Nyquist(v)
  int buckets = 1;
};

/// Exact solution operator of d_t f + v.grad_x f + L^{v0} f = 0 on the phase grid.
class LinearSemigroup {
 public:
  LinearSemigroup(const Multiplier& m, const PhaseGrid& g, const Vec& v0, V0Strategy strategy = V0Strategy::Fixed,
                  double bucket_width = 0.0)
      : m_(&m), g_(g), v0_(v0), strategy_(strategy), fft_(std::make_unique<PhaseFft>(g)) {
    if (m.params().d != g.d) throw ValidationError("grid dimension does not match the model");
    bucket_width_ = bucket_width > 0 ? bucket_width : 4.0 * g.dv();
  }

  const PhaseGrid& grid() const { return g_; }
  const SemigroupDiagnostics& diagnostics() const { return diag_; }

  KineticField apply(const KineticField& f0, double t) {
    if (!(f0.grid == g_)) throw ValidationError("field grid does not match the semigroup grid");
    if (t < 0.0) throw ValidationError("semigroup time must be nonnegative");
    if (t == 0.0) return f0;
    check_shear(t);
    if (strategy_ == V0Strategy::Fixed) return apply_fixed(f0, t, v0_, multipliers(t, v0_));
    return apply_frozen(f0, t);
  }

  /// exp(-int_0^t E(eta - sigma k, v0) d sigma) on the (k, eta) grid; memoized per (t, v0).
  const std::vector<double>& multipliers(double t, const Vec& v0) {
    Key key{t, v0(0), g_.d > 1 ? v0(1) : 0.0, g_.d > 2 ? v0(2) : 0.0};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const SymbolTable& tab = table_for(v0.norm(), t);
    Vec vhat = v0.norm() > 0 ? Vec(v0 / v0.norm()) : Vec(Vec::Zero(g_.d));
    const std::size_t nvs = g_.nvs();
    std::vector<Vec> etas(nvs);
    for (std::size_t iv = 0; iv < nvs; ++iv) etas[iv] = g_.eta_at(iv);
    std::vector<double> M(g_.size());
    const int n = m_->quad().tau_nodes;
    for (std::size_t ix = 0; ix < g_.nxs(); ++ix) {
      Vec k = g_.k_at(ix);
      for (std::size_t iv = 0; iv < nvs; ++iv) M[ix * nvs + iv] = std::exp(-tab.integrated_dir(t, k, etas[iv], n, vhat));
    }
    return cache_.emplace(key, std::move(M)).first->second;
  }

 private:
  struct Key {
    double t, a, b, c;
    bool operator<(const Key& o) const { return std::tie(t, a, b, c) < std::tie(o.t, o.a, o.b, o.c); }
  };

  void check_shear(double t) {
    double kmax = 2.0 * std::numbers::pi / g_.Lx * (g_.nx / 2);
    double nyq = std::numbers::pi / g_.dv();
    diag_.shear_ratio = std::max(diag_.shear_ratio, t * kmax * std::sqrt(static_cast<double>(g_.d)) / nyq);
    if (t * kmax >= nyq) throw NumericalError("v-grid Nyquist is insufficient for the shear eta - t k");
  }

  const SymbolTable& table_for(double r, double t) {
    double zmax = std::sqrt(static_cast<double>(g_.d)) * (std::numbers::pi / g_.dv() +
                                                           t * 2.0 * std::numbers::pi / g_.Lx * (g_.nx / 2)) + 1.0;
    auto tab = m_->symbol_table(r, zmax);
    tables_[std::lround(r * 1e9)] = tab;
    return *tab;
  }

  KineticField apply_fixed(const KineticField& f0, double t, const Vec&, const std::vector<double>& M) const {
    auto a = to_complex(f0);
    fft_->x_forward(a);
    fft_->v_forward(a);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] *= M[i];
    fft_->v_backward(a);
    apply_shear_phase(g_, a, t);
    fft_->x_backward(a);
    return from_complex(g_, a);
  }

  // v0 = v per output point, with v0 snapped to a lattice of buckets
  KineticField apply_frozen(const KineticField& f0, double t) {
    KineticField out(g_);
    std::map<std::vector<long>, std::vector<std::size_t>> buckets;
    for (std::size_t iv = 0; iv < g_.nvs(); ++iv) {
      Vec v = g_.v_at(iv);
      std::vector<long> b(g_.d);
      for (int k = 0; k < g_.d; ++k) b[k] = std::lround(v(k) / bucket_width_);
      buckets[b].push_back(iv);
    }
    diag_.buckets = static_cast<int>(buckets.size());
    for (auto& [b, ivs] : buckets) {
      Vec vc(g_.d);
      for (int k = 0; k < g_.d; ++k) vc(k) = b[k] * bucket_width_;
      // round |v0| so that radial tables are shared between buckets
      double r = std::round(vc.norm() / bucket_width_) * bucket_width_;
      if (vc.norm() > 0) vc *= r / vc.norm();
      KineticField s = apply_fixed(f0, t, vc, multipliers(t, vc));
      for (std::size_t ix = 0; ix < g_.nxs(); ++ix)
        for (std::size_t iv : ivs) out.at(ix, iv) = s.at(ix, iv);
    }
    return out;
  }

  const Multiplier* m_;
  PhaseGrid g_;
  Vec v0_;
  V0Strategy strategy_;
  double bucket_width_;
  std::unique_ptr<PhaseFft> fft_;
  std::map<Key, std::vector<double>> cache_;
  std::map<long, std::shared_ptr<const SymbolTable>> tables_;
  SemigroupDiagnostics diag_;
};

/// Gauss-Legendre nodes on [0, t] with dyadic panels accumulating at tau = t.
inline Rule duhamel_rule(double t, int n, int levels = 3) {
  std::vector<double> br{0.0};
  double a = 0.5;
  for (int l = 0; l < levels; ++l) {
    br.push_back(t * a);
    a = 0.5 + 0.5 * a;
  }
  br.push_back(t);
  return composite_rule(br, n);
}

/// int_0^t S(t - tau) F(tau) d tau.
inline KineticField duhamel_integral(const std::function<KineticField(double)>& forcing, double t, LinearSemigroup& S,
                                     int n_quad = 16, int levels = 3) {
  KineticField acc(S.grid());
  if (t <= 0.0) return acc;
  Rule r = duhamel_rule(t, n_quad, levels);
  for (std::size_t j = 0; j < r.x.size(); ++j) {
    KineticField Fj = forcing(r.x[j]);
    KineticField Sj = S.apply(Fj, t - r.x[j]);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += r.w[j] * Sj.data[i];
  }
  return acc;
}

}  // namespace kk

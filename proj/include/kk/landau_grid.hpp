#pragma once

#include <boost/math/special_functions/zeta.hpp>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "fft.hpp"
#include "field.hpp"
#include "multiplier.hpp"

namespace kk {

/// Dirichlet beta(x) = sum (-1)^k (2k+1)^{-x}; alternating-series acceleration for x > 0, reflection otherwise.
inline double dirichlet_beta(double x) {
  if (x <= 0.0) {
    double y = 1.0 - x;
    return std::pow(2.0 / std::numbers::pi, y) * std::sin(0.5 * std::numbers::pi * y) * std::tgamma(y) *
           dirichlet_beta(y);
  }
  // Cohen-Rodriguez Villegas-Zagier, algorithm 1
  const int n = 60;
  double d = std::pow(3.0 + std::sqrt(8.0), n);
  d = 0.5 * (d + 1.0 / d);
  double b = -1.0, c = -d, s = 0.0;
  for (int k = 0; k < n; ++k) {
    c = b - c;
    s += c * std::pow(2.0 * k + 1.0, -x);
    b = (k + n) * (k - n) * b / ((k + 0.5) * (k + 1.0));
  }
  return s / d;
}

/// Epstein zeta of the square lattice, sum' |m|^{-s} = 4 zeta(s/2) beta(s/2), analytically continued.
inline double epstein_square(double s) { return 4.0 * boost::math::zeta(0.5 * s) * dirichlet_beta(0.5 * s); }

/// Grid Landau operator on the v-slices of a PhaseGrid.
/// a * g uses a zero-padded FFT convolution; the origin weight is the lattice-corrected value in d = 2
/// and the cell average otherwise. Derivatives are spectral on the periodic v-box.
class LandauGrid {
 public:
  using Slice = std::vector<double>;

  LandauGrid(const Multiplier& m, const PhaseGrid& g) : m_(&m), g_(g), d_(g.d), nv_(g.nv), nvs_(g.nvs()) {
    if (!m.params().landau()) throw ValidationError("grid Landau operator requires s = 1");
    if (d_ < 2) throw ValidationError("the Landau matrix vanishes identically for d = 1");
    vfft_ = std::make_unique<Fft>(std::vector<int>(d_, nv_));
    pfft_ = std::make_unique<Fft>(std::vector<int>(d_, 2 * nv_));
    build_kernels();
    Slice mu(nvs_);
    for (std::size_t iv = 0; iv < nvs_; ++iv) mu[iv] = maxwellian(g.v_at(iv));
    mu_ = conv(mu);
    mu_vals_ = mu;
  }

  const PhaseGrid& grid() const { return g_; }
  int pairs() const { return d_ * (d_ + 1) / 2; }
  int pair(int i, int j) const {
    if (i > j) std::swap(i, j);
    return i * d_ - i * (i - 1) / 2 + (j - i);
  }

  /// origin weight of a_ii on the lattice, in units of dv^{d + gamma + 2}
  double origin_weight() const { return w0_; }

  struct Conv {
    std::vector<Slice> A;  // (a * g)_{ij}, packed pairs
    std::vector<Slice> c;  // sum_j a_ij * d_j g
    Slice b;               // sum_ij a_ij * d_ij g
  };

  /// a * g, a * grad g and a : hess g by padded convolution
  Conv conv(const Slice& g) const {
    Conv out;
    std::vector<Slice> G = grad(g), H = hess(g);
    auto P = pad(g);
    pfft_->forward(P.data());
    std::vector<std::vector<cplx>> PG(d_), PH(pairs());
    for (int i = 0; i < d_; ++i) {
      PG[i] = pad(G[i]);
      pfft_->forward(PG[i].data());
    }
    for (int p = 0; p < pairs(); ++p) {
      PH[p] = pad(H[p]);
      pfft_->forward(PH[p].data());
    }
    const std::size_t N = pfft_->size();
    out.A.resize(pairs());
    for (int p = 0; p < pairs(); ++p) {
      std::vector<cplx> t(N);
      for (std::size_t k = 0; k < N; ++k) t[k] = P[k] * khat_[p][k];
      out.A[p] = unpad(t);
    }
    out.c.resize(d_);
    for (int i = 0; i < d_; ++i) {
      std::vector<cplx> t(N, 0.0);
      for (int j = 0; j < d_; ++j)
        for (std::size_t k = 0; k < N; ++k) t[k] += PG[j][k] * khat_[pair(i, j)][k];
      out.c[i] = unpad(t);
    }
    std::vector<cplx> t(N, 0.0);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j)
        for (std::size_t k = 0; k < N; ++k) t[k] += PH[pair(i, j)][k] * khat_[pair(i, j)][k];
    out.b = unpad(t);
    return out;
  }

  std::vector<Slice> grad(const Slice& f) const {
    auto F = to_c(f);
    vfft_->forward(F.data());
    std::vector<Slice> out(d_);
    for (int i = 0; i < d_; ++i) {
      std::vector<cplx> t(nvs_);
      for (std::size_t iv = 0; iv < nvs_; ++iv) {
        Vec e = g_.eta_at(iv);
        t[iv] = nyquist(iv, i) ? 0.0 : cplx(0.0, e(i)) * F[iv];
      }
      vfft_->backward(t.data());
      out[i] = re(t);
    }
    return out;
  }

  std::vector<Slice> hess(const Slice& f) const {
    auto F = to_c(f);
    vfft_->forward(F.data());
    std::vector<Slice> out(pairs());
    for (int i = 0; i < d_; ++i)
      for (int j = i; j < d_; ++j) {
        std::vector<cplx> t(nvs_);
        for (std::size_t iv = 0; iv < nvs_; ++iv) {
          Vec e = g_.eta_at(iv);
          bool z = i != j && (nyquist(iv, i) || nyquist(iv, j));
          t[iv] = z ? 0.0 : -e(i) * e(j) * F[iv];
        }
        vfft_->backward(t.data());
        out[pair(i, j)] = re(t);
      }
    return out;
  }

  struct Split {
    Slice main, rem;
  };

  /// Q_{1,m} = div(a*f1 grad f2), Q_{1,r} = -div((a*grad f1) f2), in non-divergence form
  Split q(const Slice& f1, const Slice& f2) const { return q(conv(f1), f2); }

  Split q(const Conv& c1, const Slice& f2) const {
    std::vector<Slice> G2 = grad(f2), H2 = hess(f2);
    Split s{Slice(nvs_, 0.0), Slice(nvs_, 0.0)};
    for (std::size_t iv = 0; iv < nvs_; ++iv) {
      double mm = 0.0, cg = 0.0;
      for (int i = 0; i < d_; ++i) {
        for (int j = 0; j < d_; ++j) mm += c1.A[pair(i, j)][iv] * H2[pair(i, j)][iv];
        cg += c1.c[i][iv] * G2[i][iv];
      }
      s.main[iv] = mm + cg;
      s.rem[iv] = -cg - c1.b[iv] * f2[iv];
    }
    return s;
  }

  /// L_1 f = -div(a*mu grad f)
  Slice dominated(const Slice& f) const {
    Split s = q(mu_, f);
    for (double& x : s.main) x = -x;
    return s.main;
  }

  /// L_1^{v0} f = -(a*mu)(v0) : hess f, with the tabulated Landau matrix
  Slice frozen(const Slice& f, const Vec& v0) const {
    Mat A0 = m_->landau_matrix(v0);
    std::vector<Slice> H = hess(f);
    Slice out(nvs_, 0.0);
    for (std::size_t iv = 0; iv < nvs_; ++iv)
      for (int i = 0; i < d_; ++i)
        for (int j = 0; j < d_; ++j) out[iv] -= A0(i, j) * H[pair(i, j)][iv];
    return out;
  }

  /// R^{v0} f = -((a*mu)(v0) - a*mu) : hess f + (a * grad mu) . grad f
  Slice remainder(const Slice& f, const Vec& v0) const {
    Mat A0 = m_->landau_matrix(v0);
    std::vector<Slice> G = grad(f), H = hess(f);
    Slice out(nvs_, 0.0);
    for (std::size_t iv = 0; iv < nvs_; ++iv)
      for (int i = 0; i < d_; ++i) {
        for (int j = 0; j < d_; ++j) out[iv] -= (A0(i, j) - mu_.A[pair(i, j)][iv]) * H[pair(i, j)][iv];
        out[iv] += mu_.c[i][iv] * G[i][iv];
      }
    return out;
  }

  /// LO f = L_1 f + Q_1(mu, f) + Q_1(f, mu) = Q_{1,r}(mu, f) + Q_1(f, mu)
  Slice lower_order(const Slice& f) const {
    Split a = q(mu_, f);
    Split b = q(f, mu_vals_);
    Slice out(nvs_);
    for (std::size_t iv = 0; iv < nvs_; ++iv) out[iv] = a.rem[iv] + b.main[iv] + b.rem[iv];
    return out;
  }

  /// linearized operator -Q_1(mu, f) - Q_1(f, mu)
  Slice linearized(const Slice& f) const {
    Split a = q(mu_, f);
    Split b = q(f, mu_vals_);
    Slice out(nvs_);
    for (std::size_t iv = 0; iv < nvs_; ++iv) out[iv] = -(a.main[iv] + a.rem[iv] + b.main[iv] + b.rem[iv]);
    return out;
  }

  const Conv& mu_conv() const { return mu_; }
  const Slice& mu_values() const { return mu_vals_; }

  // ---------------------------------------------------------------- phase-space wrappers

  Slice slice(const KineticField& f, std::size_t ix) const {
    return Slice(f.data.begin() + ix * nvs_, f.data.begin() + (ix + 1) * nvs_);
  }
  void put(KineticField& f, std::size_t ix, const Slice& s) const {
    std::copy(s.begin(), s.end(), f.data.begin() + ix * nvs_);
  }

  template <class Op>
  KineticField map(const KineticField& f, Op&& op) const {
    KineticField out(f.grid);
    for (std::size_t ix = 0; ix < f.grid.nxs(); ++ix) put(out, ix, op(slice(f, ix)));
    return out;
  }

  /// G(f) = Q_1(f, f) + LO f, the nonlinear forcing of the perturbation equation
  KineticField forcing(const KineticField& f) const {
    return map(f, [&](const Slice& s) {
      Split n = q(s, s);
      Slice lo = lower_order(s);
      for (std::size_t iv = 0; iv < nvs_; ++iv) lo[iv] += n.main[iv] + n.rem[iv];
      return lo;
    });
  }

 private:
  bool nyquist(std::size_t iv, int k) const {
    auto m = PhaseGrid::unflatten(iv, nv_, d_);
    return nv_ % 2 == 0 && m[k] == nv_ / 2;
  }

  std::vector<cplx> to_c(const Slice& f) const { return std::vector<cplx>(f.begin(), f.end()); }
  static Slice re(const std::vector<cplx>& a) {
    Slice s(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) s[i] = a[i].real();
    return s;
  }

  std::size_t pidx(const std::array<int, 3>& m) const {
    std::size_t i = 0;
    for (int k = 0; k < d_; ++k) i = i * (2 * nv_) + m[k];
    return i;
  }

  std::vector<cplx> pad(const Slice& f) const {
    std::vector<cplx> P(pfft_->size(), 0.0);
    for (std::size_t iv = 0; iv < nvs_; ++iv) P[pidx(PhaseGrid::unflatten(iv, nv_, d_))] = f[iv];
    return P;
  }

  Slice unpad(std::vector<cplx>& t) const {
    pfft_->backward(t.data());
    Slice s(nvs_);
    for (std::size_t iv = 0; iv < nvs_; ++iv) s[iv] = t[pidx(PhaseGrid::unflatten(iv, nv_, d_))].real();
    return s;
  }

  void build_kernels() {
    const double h = g_.dv();
    const double al = m_->params().gamma + 2.0;
    const double cell = std::pow(h, d_);
    if (d_ == 2) {
      w0_ = -epstein_square(-al);
    } else {
      // cell average of |z|^al over [-1/2, 1/2]^d by tensor Gauss-Legendre in the positive octant
      const Rule& gl = gauss_legendre(24);
      double acc = 0.0;
      for (std::size_t i = 0; i < gl.x.size(); ++i)
        for (std::size_t j = 0; j < gl.x.size(); ++j)
          for (std::size_t k = 0; k < gl.x.size(); ++k) {
            double x = 0.25 * (gl.x[i] + 1), y = 0.25 * (gl.x[j] + 1), z = 0.25 * (gl.x[k] + 1);
            acc += gl.w[i] * gl.w[j] * gl.w[k] / 64.0 * std::pow(x * x + y * y + z * z, 0.5 * al);
          }
      w0_ = 8.0 * acc;
    }
    const int P = 2 * nv_;
    const std::size_t N = PhaseGrid::ipow(P, d_);
    khat_.assign(pairs(), std::vector<cplx>(N, 0.0));
    for (std::size_t k = 0; k < N; ++k) {
      auto m = PhaseGrid::unflatten(k, P, d_);
      Vec z(d_);
      bool skip = false;
      for (int a = 0; a < d_; ++a) {
        int o = m[a] < nv_ ? m[a] : m[a] - P;
        if (m[a] == nv_) skip = true;
        z(a) = o * h;
      }
      if (skip) continue;
      double r = z.norm();
      for (int i = 0; i < d_; ++i)
        for (int j = i; j < d_; ++j) {
          double v;
          if (r == 0.0) v = i == j ? (d_ - 1.0) / d_ * w0_ * std::pow(h, d_ + al) : 0.0;
          else v = cell * std::pow(r, al) * ((i == j ? 1.0 : 0.0) - z(i) * z(j) / (r * r));
          khat_[pair(i, j)][k] = v;
        }
    }
    for (auto& K : khat_) pfft_->forward(K.data());
  }

  const Multiplier* m_;
  PhaseGrid g_;
  int d_, nv_;
  std::size_t nvs_;
  std::unique_ptr<Fft> vfft_, pfft_;
  std::vector<std::vector<cplx>> khat_;
  double w0_ = 0.0;
  Conv mu_;
  Slice mu_vals_;
};

}  // namespace kk

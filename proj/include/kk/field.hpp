#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "geometry.hpp"
#include "params.hpp"
#include "quadrature.hpp"

namespace kk {

/// Tensor grid: periodic x-torus [x_lo, x_lo+Lx)^d times velocity box [-V, V)^d.
struct PhaseGrid {
  int d = 2;
  int nx = 1;
  double Lx = 2.0 * std::numbers::pi;
  int nv = 32;
  double V = 6.0;

  double dx() const { return Lx / nx; }
  double dv() const { return 2.0 * V / nv; }
  double x_lo() const { return -0.5 * Lx; }
  std::size_t nxs() const { return ipow(nx, d); }
  std::size_t nvs() const { return ipow(nv, d); }
  std::size_t size() const { return nxs() * nvs(); }
  double cell_v() const { return std::pow(dv(), d); }
  double cell_x() const { return std::pow(dx(), d); }

  static std::size_t ipow(int n, int d) {
    std::size_t r = 1;
    for (int i = 0; i < d; ++i) r *= static_cast<std::size_t>(n);
    return r;
  }
  /// multi-index of flat index i on an n^d grid (last coordinate fastest)
  static std::array<int, 3> unflatten(std::size_t i, int n, int d) {
    std::array<int, 3> m{0, 0, 0};
    for (int k = d - 1; k >= 0; --k) {
      m[k] = static_cast<int>(i % n);
      i /= n;
    }
    return m;
  }
  Vec v_at(std::size_t iv) const {
    auto m = unflatten(iv, nv, d);
    Vec v(d);
    for (int k = 0; k < d; ++k) v(k) = -V + m[k] * dv();
    return v;
  }
  Vec x_at(std::size_t ix) const {
    auto m = unflatten(ix, nx, d);
    Vec x(d);
    for (int k = 0; k < d; ++k) x(k) = x_lo() + m[k] * dx();
    return x;
  }
  /// angular frequency vector of DFT index on the v-grid
  Vec eta_at(std::size_t iv) const;
  Vec k_at(std::size_t ix) const;

  bool operator==(const PhaseGrid& o) const {
    return d == o.d && nx == o.nx && Lx == o.Lx && nv == o.nv && V == o.V;
  }
};

}  // namespace kk

#include "fft.hpp"

namespace kk {

inline Vec PhaseGrid::eta_at(std::size_t iv) const {
  auto m = unflatten(iv, nv, d);
  Vec e(d);
  for (int k = 0; k < d; ++k) e(k) = fft_freq(m[k], nv, 2.0 * V);
  return e;
}
inline Vec PhaseGrid::k_at(std::size_t ix) const {
  auto m = unflatten(ix, nx, d);
  Vec e(d);
  for (int k = 0; k < d; ++k) e(k) = fft_freq(m[k], nx, Lx);
  return e;
}

/// Moments (mass, momentum..., energy) of the x-averaged field.
struct Moments {
  std::vector<double> m;  // size d + 2
  double max_abs_diff(const Moments& o) const {
    double r = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) r = std::max(r, std::abs(m[i] - o.m[i]));
    return r;
  }
};

/// A sampled perturbation f(x, v); layout is x-major: data[ix * nvs + iv].
struct KineticField {
  PhaseGrid grid;
  std::vector<double> data;

  KineticField() = default;
  explicit KineticField(const PhaseGrid& g) : grid(g), data(g.size(), 0.0) {}

  double& at(std::size_t ix, std::size_t iv) { return data[ix * grid.nvs() + iv]; }
  double at(std::size_t ix, std::size_t iv) const { return data[ix * grid.nvs() + iv]; }

  static KineticField sample(const PhaseGrid& g, const std::function<double(const Vec&, const Vec&)>& f) {
    KineticField k(g);
    for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
      Vec x = g.x_at(ix);
      for (std::size_t iv = 0; iv < g.nvs(); ++iv) k.at(ix, iv) = f(x, g.v_at(iv));
    }
    return k;
  }

  double max_abs() const {
    double m = 0.0;
    for (double a : data) m = std::max(m, std::abs(a));
    return m;
  }
  double l2() const {
    std::vector<double> sq(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) sq[i] = data[i] * data[i];
    return std::sqrt(pairwise_sum(sq) * grid.cell_x() * grid.cell_v());
  }
  KineticField& operator+=(const KineticField& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  KineticField& operator-=(const KineticField& o) {
    for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
    return *this;
  }
  KineticField& operator*=(double a) {
    for (double& x : data) x *= a;
    return *this;
  }
  friend KineticField operator+(KineticField a, const KineticField& b) { return a += b; }
  friend KineticField operator-(KineticField a, const KineticField& b) { return a -= b; }
  friend KineticField operator*(double s, KineticField a) { return a *= s; }

  Moments moments() const {
    const int d = grid.d;
    Moments mo;
    mo.m.assign(d + 2, 0.0);
    std::vector<std::vector<double>> terms(d + 2, std::vector<double>(grid.nvs()));
    for (std::size_t iv = 0; iv < grid.nvs(); ++iv) {
      double avg = 0.0;
      for (std::size_t ix = 0; ix < grid.nxs(); ++ix) avg += at(ix, iv);
      avg /= static_cast<double>(grid.nxs());
      Vec v = grid.v_at(iv);
      terms[0][iv] = avg;
      for (int k = 0; k < d; ++k) terms[1 + k][iv] = avg * v(k);
      terms[d + 1][iv] = avg * v.squaredNorm();
    }
    for (int k = 0; k < d + 2; ++k) mo.m[k] = pairwise_sum(terms[k]) * grid.cell_v();
    return mo;
  }
};

inline double rel_l2(const KineticField& a, const KineticField& b) {
  double num = (a - b).l2(), den = b.l2();
  return den > 0 ? num / den : num;
}

namespace detail {
/// 4-point cubic Lagrange weights for fractional offset u in [0,1) (nodes -1,0,1,2).
inline std::array<double, 4> cubic_weights(double u) {
  return {-u * (u - 1.0) * (u - 2.0) / 6.0, (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
          -(u + 1.0) * u * (u - 2.0) / 2.0, (u + 1.0) * u * (u - 1.0) / 6.0};
}
}  // namespace detail

/// Separable cubic interpolation in v of the slice ix; zero outside the box.
inline double interp_v(const KineticField& f, std::size_t ix, const Vec& v) {
  const PhaseGrid& g = f.grid;
  const int d = g.d;
  std::array<int, 3> base{};
  std::array<std::array<double, 4>, 3> w{};
  for (int k = 0; k < d; ++k) {
    double s = (v(k) + g.V) / g.dv();
    int b = static_cast<int>(std::floor(s));
    if (b < 0 || b > g.nv - 1) return 0.0;
    base[k] = b;
    w[k] = detail::cubic_weights(s - b);
  }
  const double* slice = f.data.data() + ix * g.nvs();
  double acc = 0.0;
  int total = 1;
  for (int k = 0; k < d; ++k) total *= 4;
  for (int c = 0; c < total; ++c) {
    int cc = c;
    std::size_t idx = 0;
    double wt = 1.0;
    bool ok = true;
    for (int k = 0; k < d; ++k) {
      int o = cc % 4;
      cc /= 4;
      int j = base[k] + o - 1;
      if (j < 0 || j >= g.nv) {
        ok = false;
        break;
      }
      wt *= w[k][o];
      idx = idx * g.nv + j;
    }
    if (ok) acc += wt * slice[idx];
  }
  return acc;
}

/// Separable cubic interpolation in (x, v); x is periodic.
inline double interp_xv(const KineticField& f, const Vec& x, const Vec& v) {
  const PhaseGrid& g = f.grid;
  const int d = g.d;
  if (g.nx == 1) return interp_v(f, 0, v);
  std::array<int, 3> base{};
  std::array<std::array<double, 4>, 3> w{};
  for (int k = 0; k < d; ++k) {
    double s = (x(k) - g.x_lo()) / g.dx();
    int b = static_cast<int>(std::floor(s));
    base[k] = b;
    w[k] = detail::cubic_weights(s - b);
  }
  int total = 1;
  for (int k = 0; k < d; ++k) total *= 4;
  double acc = 0.0;
  for (int c = 0; c < total; ++c) {
    int cc = c;
    std::size_t idx = 0;
    double wt = 1.0;
    for (int k = 0; k < d; ++k) {
      int o = cc % 4;
      cc /= 4;
      int j = ((base[k] + o - 1) % g.nx + g.nx) % g.nx;
      wt *= w[k][o];
      idx = idx * g.nx + j;
    }
    acc += wt * interp_v(f, idx, v);
  }
  return acc;
}

/// F_lambda(x, v) = lambda^{-nu(d+gamma)-1} F(x / lambda^{1+nu}, v / lambda^nu) resampled on the same grid.
inline KineticField scaling_transform(const KineticField& f, const ModelParams& p, double lambda, double nu,
                                      double support_tol = 1e-12) {
  if (!(lambda > 0.0)) throw ValidationError("scaling_transform: lambda must be positive");
  const PhaseGrid& g = f.grid;
  if (lambda == 1.0) return f;
  const double amp = scaling_amplitude(p, lambda, nu);
  const double sx = std::pow(lambda, 1.0 + nu), sv = std::pow(lambda, nu);
  // coverage: every significant value must land inside the v-box after stretching
  double fmax = f.max_abs();
  for (std::size_t ix = 0; ix < g.nxs(); ++ix)
    for (std::size_t iv = 0; iv < g.nvs(); ++iv)
      if (std::abs(f.at(ix, iv)) > support_tol * fmax) {
        Vec v = g.v_at(iv) * sv;
        if (v.cwiseAbs().maxCoeff() >= g.V) throw NumericalError("scaling_transform: rescaled support exceeds the v-box");
      }
  KineticField out(g);
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    Vec x = g.x_at(ix) / sx;
    bool xin = g.nx == 1 || x.cwiseAbs().maxCoeff() < 0.5 * g.Lx;
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
      if (!xin) continue;
      out.at(ix, iv) = amp * interp_xv(f, x, g.v_at(iv) / sv);
    }
  }
  return out;
}

}  // namespace kk

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "fft.hpp"
#include "geometry.hpp"
#include "multiplier.hpp"
#include "quadrature.hpp"

namespace kk {

namespace detail {

inline std::array<double, 4> lagrange4(double u) {
  return {-u * (u - 1.0) * (u - 2.0) / 6.0, (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0,
          -(u + 1.0) * u * (u - 2.0) / 2.0, (u + 1.0) * u * (u - 1.0) / 6.0};
}

/// Tensor cubic interpolation on a centered grid: coordinate of index j on axis a is (j - n_a/2) h_a.
inline double interp_centered(const std::vector<double>& vals, const std::vector<int>& n, const std::vector<double>& h,
                              const std::vector<double>& y) {
  const int D = static_cast<int>(n.size());
  std::vector<int> base(D);
  std::vector<std::array<double, 4>> w(D);
  for (int a = 0; a < D; ++a) {
    double s = y[a] / h[a] + n[a] / 2;
    int j = static_cast<int>(std::floor(s));
    if (j < 1 || j > n[a] - 3) return 0.0;
    base[a] = j - 1;
    w[a] = lagrange4(s - j);
  }
  std::vector<std::size_t> stride(D, 1);
  for (int a = D - 2; a >= 0; --a) stride[a] = stride[a + 1] * n[a + 1];
  double acc = 0.0;
  const int total = 1 << (2 * D);
  for (int c = 0; c < total; ++c) {
    std::size_t idx = 0;
    double wt = 1.0;
    for (int a = 0; a < D; ++a) {
      int o = (c >> (2 * a)) & 3;
      idx += static_cast<std::size_t>(base[a] + o) * stride[a];
      wt *= w[a][o];
    }
    acc += wt * vals[idx];
  }
  return acc;
}

}  // namespace detail

/// Closed-form H^1_{v0}(t, x, v) and its first derivatives, evaluated in the v0 frame.
class LandauKernel {
 public:
  LandauKernel(const Multiplier& m, double t, const Vec& v0) : frame_(make_frame(v0)), t_(t) {
    if (m.params().s != 1.0) throw ValidationError("landau_kernel requires s = 1");
    if (!(t > 0.0)) throw ValidationError("landau_kernel requires t > 0");
    const int d = m.params().d;
    auto [c1, c2] = m.landau_eigen(frame_.r());
    c_.assign(d, c1);
    c_[d - 1] = c2;
    pref_ = std::pow(t, -2.0 * d) * std::pow(3.0 / (4.0 * std::numbers::pi * std::numbers::pi), 0.5 * d);
    for (double c : c_) pref_ /= c;
  }

  const AnisotropicFrame& frame() const { return frame_; }
  double c(int k) const { return c_[k]; }

  double operator()(const Vec& x, const Vec& v) const { return frame_value(frame_.to_frame(x), frame_.to_frame(v)); }

  double frame_value(const Vec& xf, const Vec& vf) const {
    double q = 0.0;
    for (int k = 0; k < xf.size(); ++k) {
      double X = xf(k) / std::sqrt(c_[k] * t_ * t_ * t_), V = vf(k) / std::sqrt(c_[k] * t_);
      double Y = 1.5 * X + V;
      q += 0.75 * X * X + Y * Y;
    }
    return pref_ * std::exp(-q);
  }

  /// exponent q with H = prefactor * exp(-q)
  double exponent(const Vec& x, const Vec& v) const { return -std::log(frame_value(frame_.to_frame(x), frame_.to_frame(v)) / pref_); }
  double prefactor() const { return pref_; }

  /// frame-coordinate gradients (d/dx, d/dv) of H
  std::pair<Vec, Vec> frame_gradient(const Vec& xf, const Vec& vf) const {
    double H = frame_value(xf, vf);
    Vec gx(xf.size()), gv(xf.size());
    for (int k = 0; k < xf.size(); ++k) {
      double sx = std::sqrt(c_[k] * t_ * t_ * t_), sv = std::sqrt(c_[k] * t_);
      double X = xf(k) / sx, V = vf(k) / sv, Y = 1.5 * X + V;
      gv(k) = -H * 2.0 * Y / sv;
      gx(k) = -H * (1.5 * X + 3.0 * Y) / sx;
    }
    return {gx, gv};
  }

 private:
  AnisotropicFrame frame_;
  double t_;
  std::vector<double> c_;
  double pref_ = 1.0;
};

inline double landau_kernel(const Multiplier& m, double t, const Vec& x, const Vec& v, const Vec& v0) {
  return LandauKernel(m, t, v0)(x, v);
}

/// H^s_{v0}(t) sampled on a centered (x, v) grid in the v0 frame.
struct KernelEval {
  double t = 0.0;
  Vec v0;
  AnisotropicFrame frame;
  std::string method;
  int d = 2;
  std::vector<int> n;        // points per axis (x_1..x_d, v_1..v_d)
  std::vector<double> h;     // grid spacing per axis
  std::vector<double> Xi;    // frequency half-box per axis
  std::vector<double> values;
  double err_trunc = 0.0;    // sup of the Fourier integrand on the box faces
  double err_alias = 0.0;    // mass in the outer 5% shell of the period
  double neg_mass = 0.0;
  double mass = 0.0;

  double tolerance() const { return err_trunc + err_alias + 1e-13; }

  /// frame coordinate of centered index j on axis a
  double coord(int a, int j) const { return (j - n[a] / 2) * h[a]; }

  /// cubic interpolation at lab coordinates (zero outside the grid)
  double at(const Vec& x, const Vec& v) const {
    Vec xf = frame.to_frame(x), vf = frame.to_frame(v);
    if (static_cast<int>(n.size()) == d) return detail::interp_centered(values, n, h, std::vector<double>(vf.data(), vf.data() + d));
    std::vector<double> y(2 * d);
    for (int k = 0; k < d; ++k) {
      y[k] = xf(k);
      y[d + k] = vf(k);
    }
    return detail::interp_centered(values, n, h, y);
  }

  /// whether the lab point lies inside the sampled box (at() is zero outside)
  bool covers(const Vec& x, const Vec& v) const {
    Vec xf = frame.to_frame(x), vf = frame.to_frame(v);
    const bool marginal = static_cast<int>(n.size()) == d;
    for (int a = 0; a < static_cast<int>(n.size()); ++a) {
      double y = marginal ? vf(a) : (a < d ? xf(a) : vf(a - d));
      if (std::abs(y) >= (n[a] / 2 - 2) * h[a]) return false;
    }
    return true;
  }

  double max_value() const { return *std::max_element(values.begin(), values.end()); }
};

namespace detail {

/// Inverse Fourier transform of exp(-I(w)) sampled on the box prod [-Xi_a, Xi_a), centered output in K.
template <class F>
void invert_on_box(const F& integ, const std::vector<int>& n, const std::vector<double>& Xi, KernelEval& K) {
  const int D = static_cast<int>(n.size());
  std::size_t total = 1;
  for (int a = 0; a < D; ++a) total *= static_cast<std::size_t>(n[a]);
  std::vector<double> dw(D);
  K.h.resize(D);
  for (int a = 0; a < D; ++a) {
    dw[a] = 2.0 * Xi[a] / n[a];
    K.h[a] = std::numbers::pi / Xi[a];
  }
  auto split = [&](std::size_t i, std::vector<int>& j) {
    for (int a = D - 1; a >= 0; --a) {
      j[a] = static_cast<int>(i % n[a]);
      i /= n[a];
    }
  };
  auto join = [&](const std::vector<int>& j) {
    std::size_t i = 0;
    for (int a = 0; a < D; ++a) i = i * n[a] + j[a];
    return i;
  };
  // sample in FFT order, using M(w) = M(-w)
  std::vector<cplx> buf(total);
  std::vector<int> j(D), jm(D);
  std::vector<double> w(D);
  double face_max = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    split(i, j);
    for (int a = 0; a < D; ++a) jm[a] = (n[a] - j[a]) % n[a];
    std::size_t im = join(jm);
    if (im < i) {
      buf[i] = buf[im];
      continue;
    }
    bool face = false;
    for (int a = 0; a < D; ++a) {
      w[a] = fft_freq(j[a], n[a], n[a] * K.h[a]);
      if (j[a] == n[a] / 2) face = true;
    }
    double val = std::exp(-integ(w));
    buf[i] = val;
    if (face) face_max = std::max(face_max, val);
  }
  K.err_trunc = face_max;

  Fft fft(n);
  fft.backward(buf.data());  // normalized by 1/N; undone below
  double scale = static_cast<double>(total) * std::pow(2.0 * std::numbers::pi, -D);
  double cell = 1.0;
  for (int a = 0; a < D; ++a) {
    scale *= dw[a];
    cell *= K.h[a];
  }
  K.values.assign(total, 0.0);
  double mass = 0.0, neg = 0.0, shell = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    split(i, j);
    bool outer = false;
    for (int a = 0; a < D; ++a) {
      j[a] = (j[a] + n[a] / 2) % n[a];
      if (std::abs(j[a] - n[a] / 2) >= static_cast<int>(0.45 * n[a])) outer = true;
    }
    double val = buf[i].real() * scale;
    K.values[join(j)] = val;
    mass += val * cell;
    if (val < 0) neg -= val * cell;
    if (outer) shell += std::abs(val) * cell;
  }
  K.mass = mass;
  K.neg_mass = neg;
  K.err_alias = shell;
}

}  // namespace detail

struct FourierKernelSpec {
  int n = 64;               // points per axis
  double lambda_cut = 30.0;  // integrated symbol on the box faces
  int face_samples = 7;
  std::size_t budget = std::size_t(1) << 25;
};

/// Fourier inversion of exp(-int_0^t E^s(sigma xi - eta, v0) d sigma) by a 2d-dimensional FFT.
inline KernelEval fourier_kernel(const Multiplier& m, double t, const Vec& v0, const FourierKernelSpec& spec = {}) {
  if (!(t > 0.0)) throw ValidationError("kernel evaluation requires t > 0");
  const int d = m.params().d;
  const int D = 2 * d;
  const int n = spec.n;
  std::size_t total = 1;
  for (int a = 0; a < D; ++a) total *= static_cast<std::size_t>(n);
  if (total > spec.budget) throw NumericalError("frequency box exceeds the FFT memory budget");

  KernelEval K;
  K.t = t;
  K.v0 = v0;
  K.frame = make_frame(v0);
  K.d = d;
  K.n.assign(D, n);
  K.method = "fourier-quadrature";
  const double r = K.frame.r();
  Vec v0f = Vec::Zero(d);
  v0f(d - 1) = r;
  const bool landau = m.params().s == 1.0;

  // integrated symbol as a function of the frame frequency w = (xi, eta)
  std::shared_ptr<const SymbolTable> tab;
  std::vector<double> c;
  if (landau) {
    auto [c1, c2] = m.landau_eigen(r);
    c.assign(d, c1);
    c[d - 1] = c2;
  }
  auto integ = [&](const std::vector<double>& w) {
    if (landau) {
      double I = 0.0;
      for (int k = 0; k < d; ++k) {
        double xi = w[k], eta = w[d + k];
        I += c[k] * (t * t * t / 3.0 * xi * xi - t * t * xi * eta + t * eta * eta);
      }
      return I;
    }
    Vec xi(d), eta(d);
    for (int k = 0; k < d; ++k) {
      xi(k) = w[k];
      eta(k) = w[d + k];
    }
    return tab->integrated(t, xi, eta, m.quad().tau_nodes);
  };

  std::vector<double> Xi(D);
  if (landau) {
    // quadratic form: its minimum over the face w_a = Xi is Xi^2 / (M^{-1})_aa
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(D, D);
    for (int k = 0; k < d; ++k) {
      M(k, k) = c[k] * t * t * t / 3.0;
      M(d + k, d + k) = c[k] * t;
      M(k, d + k) = M(d + k, k) = -0.5 * c[k] * t * t;
    }
    Eigen::MatrixXd Mi = M.inverse();
    for (int a = 0; a < D; ++a) Xi[a] = std::sqrt(spec.lambda_cut * Mi(a, a));
  } else {
    auto cover = [&] {
      double z2 = 0.0;
      for (int k = 0; k < d; ++k) z2 += (Xi[d + k] + t * Xi[k]) * (Xi[d + k] + t * Xi[k]);
      tab = m.symbol_table(r, 1.1 * std::sqrt(z2) + 1.0);
    };
    // start from the axis crossings, then grow each face until its sampled minimum reaches lambda_cut
    tab = m.symbol_table(r, 16.0);
    for (int a = 0; a < D; ++a) {
      std::vector<double> w(D, 0.0);
      double X = 0.5;
      for (w[a] = X; integ(w) < spec.lambda_cut && X < 1e6; w[a] = X) {
        X *= 1.25;
        if (X > 0.5 * tab->zmax()) {
          Xi.assign(D, X);
          cover();
        }
      }
      Xi[a] = X;
    }
    cover();
    auto face_min = [&](int a, double X) {
      const int ns = spec.face_samples;
      int cnt = 1;
      for (int i = 0; i < D - 1; ++i) cnt *= ns;
      double mn = 1e300;
      std::vector<double> w(D);
      for (int id = 0; id < cnt; ++id) {
        int rem = id;
        for (int b = 0; b < D; ++b) {
          if (b == a) {
            w[b] = X;
            continue;
          }
          w[b] = Xi[b] * (-1.0 + 2.0 * (rem % ns) / (ns - 1));
          rem /= ns;
        }
        mn = std::min(mn, integ(w));
      }
      return mn;
    };
    for (int pass = 0; pass < 4; ++pass) {
      bool changed = false;
      for (int a = 0; a < D; ++a)
        while (face_min(a, Xi[a]) < spec.lambda_cut && Xi[a] < 1e6) {
          Xi[a] *= 1.15;
          changed = true;
        }
      cover();
      if (!changed) break;
    }
  }
  K.Xi = Xi;
  detail::invert_on_box(integ, K.n, Xi, K);
  return K;
}

/// x-integrated kernel int H^s_{v0}(t, x, v) dx, i.e. the inversion of exp(-t E^s(eta, v0)) on a d-dimensional box.
inline KernelEval kernel_v_marginal(const Multiplier& m, double t, const Vec& v0, double half_width = 8.0,
                                    double lambda_cut = 30.0, std::size_t budget = std::size_t(1) << 24) {
  if (!(t > 0.0)) throw ValidationError("kernel evaluation requires t > 0");
  const int d = m.params().d;
  KernelEval K;
  K.t = t;
  K.v0 = v0;
  K.frame = make_frame(v0);
  K.d = d;
  K.method = "fourier-quadrature (v-marginal)";
  const double r = K.frame.r();
  auto tab = m.symbol_table(r, 16.0);
  Vec eta(d);
  auto E = [&](const std::vector<double>& w) {
    for (int k = 0; k < d; ++k) eta(k) = w[k];
    return t * tab->eval(eta);
  };
  std::vector<double> Xi(d, 1.0);
  for (int a = 0; a < d; ++a) {
    std::vector<double> w(d, 0.0);
    double X = 0.5;
    for (w[a] = X; E(w) < lambda_cut && X < 1e6; w[a] = X) {
      X *= 1.25;
      if (X > 0.5 * tab->zmax()) tab = m.symbol_table(r, 4.0 * X);
    }
    Xi[a] = X;
  }
  tab = m.symbol_table(r, 1.5 * (*std::max_element(Xi.begin(), Xi.end())) * std::sqrt(double(d)));
  // the face minimum may sit off-axis
  for (int a = 0; a < d; ++a)
    for (int it = 0; it < 200; ++it) {
      double mn = 1e300;
      std::vector<double> w(d);
      const int ns = 33;
      int cnt = d == 1 ? 1 : (d == 2 ? ns : ns * ns);
      for (int id = 0; id < cnt; ++id) {
        int rem = id;
        for (int b = 0; b < d; ++b) {
          if (b == a) {
            w[b] = Xi[a];
            continue;
          }
          w[b] = Xi[b] * (-1.0 + 2.0 * (rem % ns) / (ns - 1));
          rem /= ns;
        }
        mn = std::min(mn, E(w));
      }
      if (mn >= lambda_cut) break;
      Xi[a] *= 1.05;
    }
  tab = m.symbol_table(r, 1.5 * (*std::max_element(Xi.begin(), Xi.end())) * std::sqrt(double(d)));
  K.n.resize(d);
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) {
    // period at least 2 * half_width
    int n = static_cast<int>(std::ceil(2.0 * Xi[a] * 2.0 * half_width / (2.0 * std::numbers::pi)));
    n += n % 2;
    K.n[a] = n;
    total *= static_cast<std::size_t>(n);
  }
  if (total > budget) throw NumericalError("v-marginal box exceeds the FFT memory budget");
  K.Xi = Xi;
  detail::invert_on_box(E, K.n, Xi, K);
  return K;
}

/// Pointwise H^s_{v0} for s < 1 through the FFT grid (recomputed when (t, v0) changes).
inline double boltzmann_kernel(const Multiplier& m, double t, const Vec& x, const Vec& v, const Vec& v0,
                               const FourierKernelSpec& spec = {}) {
  if (m.params().s >= 1.0) throw ValidationError("boltzmann_kernel requires s < 1");
  thread_local KernelEval last;
  thread_local std::string key;
  std::string k = params_key(m.params(), m.quad()) + "|" + std::to_string(t) + "|" + std::to_string(spec.n) + "|" +
                  std::to_string(spec.lambda_cut);
  for (int i = 0; i < v0.size(); ++i) k += "|" + std::to_string(v0(i));
  if (k != key) {
    last = fourier_kernel(m, t, v0, spec);
    key = k;
  }
  return last.at(x, v);
}

// ---------------------------------------------------------------------------------------------
// Fractional Kolmogorov kernel K(x,v) = (2pi)^{-2d} int exp(-int_0^1 |tau xi - eta|^{2s} dtau + i(xi.x + eta.v))

/// int_0^1 |tau xi - eta|^alpha d tau for vectors given through A=|xi|^2, B=xi.eta, C=|eta|^2.
inline double kolmogorov_phi(double A, double B, double C, double alpha) {
  if (alpha == 2.0) return A / 3.0 - B + C;
  if (A <= 1e-300) return std::pow(C, 0.5 * alpha);
  double ts = B / A;
  double D = std::max(C - B * B / A, 0.0);
  // int_{u0}^{u1} (A u^2 + D)^{alpha/2} du with u = tau - ts
  auto prim_abs = [&](double u) {  // antiderivative on [0, u] for u >= 0, alpha = 1
    double q = std::sqrt(A * u * u + D);
    double res = 0.5 * u * q;
    if (D > 0) res += 0.5 * D / std::sqrt(A) * std::asinh(u * std::sqrt(A / D));
    return res;
  };
  auto piece = [&](double u) {  // int_0^u for u >= 0
    if (u <= 0.0) return 0.0;
    if (alpha == 1.0) return prim_abs(u);
    const Rule& g = gauss_legendre(24);
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) {
      double wq = 0.5 * (g.x[i] + 1.0);
      double uu = u * wq * wq;
      s += 0.5 * g.w[i] * std::pow(A * uu * uu + D, 0.5 * alpha) * 2.0 * u * wq;
    }
    return s;
  };
  double u0 = -ts, u1 = 1.0 - ts;
  if (u0 >= 0.0) return piece(u1) - piece(u0);
  if (u1 <= 0.0) return piece(-u0) - piece(-u1);
  return piece(u1) + piece(-u0);
}

struct KolmogorovSpec {
  double lambda_cut = 12.0;
  double half_width = 4.0;  // evaluation box [-L, L]^{2d}
  double period_factor = 4.0;
  int eta2_nodes = 32;
  std::size_t budget = std::size_t(1) << 26;
};

/// Tabulated fractional Kolmogorov kernel. For d = 2 the rotation invariance reduces the
/// inversion to a 3D FFT in (xi_1, xi_2, eta_1) at outputs v = |v| e_1.
class KolmogorovKernel {
 public:
  KolmogorovKernel(int d, double s, const KolmogorovSpec& spec = {}) : d_(d), s_(s), spec_(spec) {
    if (!(s > 0.0 && s <= 1.0)) throw ValidationError("kolmogorov_kernel requires s in (0, 1]");
    if (d != 1 && d != 2) throw ValidationError("kolmogorov_kernel supports d = 1 or d = 2");
    const double alpha = 2.0 * s;
    // Phi >= |xi|^alpha 2^{-alpha}/(alpha+1) and Phi >= |eta|^alpha/(alpha+1)
    Xi_ = std::pow(spec.lambda_cut * (alpha + 1.0) * std::pow(2.0, alpha), 1.0 / alpha);
    Eta_ = std::pow(spec.lambda_cut * (alpha + 1.0), 1.0 / alpha);
    double reach = (d == 2 ? std::sqrt(2.0) : 1.0) * spec.half_width;
    P_ = spec.period_factor * reach;
    nxi_ = even_size(2.0 * Xi_ * P_ / (2.0 * std::numbers::pi));
    neta_ = even_size(2.0 * Eta_ * P_ / (2.0 * std::numbers::pi));
    // re-fit the boxes to the integer grid sizes
    Xi_ = std::numbers::pi * nxi_ / P_;
    Eta_ = std::numbers::pi * neta_ / P_;
    if (d == 1) build1();
    else build2();
  }

  int d() const { return d_; }
  double s() const { return s_; }
  double xi_box() const { return Xi_; }
  double eta_box() const { return Eta_; }
  double period() const { return P_; }
  std::vector<int> dims() const { return n_; }
  double truncation_estimate() const { return std::exp(-spec_.lambda_cut); }

  double operator()(const Vec& x, const Vec& v) const {
    if (d_ == 1) return detail::interp_centered(vals_, n_, h_, {x(0), v(0)});
    double w = v.norm();
    double c = 1.0, sn = 0.0;
    if (w > 0) {
      c = v(0) / w;
      sn = v(1) / w;
    }
    // rotate so that v lies on the positive first axis
    double x1 = c * x(0) + sn * x(1), x2 = -sn * x(0) + c * x(1);
    return detail::interp_centered(vals_, n_, h_, {x1, x2, w});
  }

  /// x-integral of K(., w e_1): the density of the stable velocity at w e_1
  double v_marginal(double w) const {
    if (d_ != 2) throw ValidationError("v_marginal is provided for d = 2");
    double cell = h_[0] * h_[1];
    int jw = static_cast<int>(std::lround(w / h_[2])) + n_[2] / 2;
    double acc = 0.0;
    for (int i = 0; i < n_[0]; ++i)
      for (int j = 0; j < n_[1]; ++j) acc += vals_[(static_cast<std::size_t>(i) * n_[1] + j) * n_[2] + jw];
    return acc * cell;
  }

  /// explicit kernel for s = 1
  static double gaussian(const Vec& x, const Vec& v) {
    const int d = static_cast<int>(x.size());
    double q = 3.0 * x.squaredNorm() + 3.0 * x.dot(v) + v.squaredNorm();
    return std::pow(3.0 / (4.0 * std::numbers::pi * std::numbers::pi), 0.5 * d) * std::exp(-q);
  }

 private:
  static int even_size(double x) {
    int n = static_cast<int>(std::ceil(x));
    n += n % 2;
    // prefer 2^a 3^b 5^c sizes
    auto smooth = [](int m) {
      for (int p : {2, 3, 5})
        while (m % p == 0) m /= p;
      return m == 1;
    };
    while (!smooth(n)) n += 2;
    return n;
  }

  void build1() {
    const double alpha = 2.0 * s_;
    n_ = {nxi_, neta_};
    h_ = {P_ / nxi_, P_ / neta_};
    std::vector<cplx> buf(static_cast<std::size_t>(nxi_) * neta_);
    for (int i = 0; i < nxi_; ++i)
      for (int j = 0; j < neta_; ++j) {
        double xi = fft_freq(i, nxi_, P_), eta = fft_freq(j, neta_, P_);
        buf[static_cast<std::size_t>(i) * neta_ + j] = std::exp(-kolmogorov_phi(xi * xi, xi * eta, eta * eta, alpha));
      }
    Fft fft({nxi_, neta_});
    fft.backward(buf.data());
    double dxi = 2.0 * std::numbers::pi / P_;
    double scale = static_cast<double>(buf.size()) * dxi * dxi / std::pow(2.0 * std::numbers::pi, 2);
    vals_.assign(buf.size(), 0.0);
    for (int i = 0; i < nxi_; ++i)
      for (int j = 0; j < neta_; ++j) {
        int ci = (i + nxi_ / 2) % nxi_, cj = (j + neta_ / 2) % neta_;
        vals_[static_cast<std::size_t>(ci) * neta_ + cj] = buf[static_cast<std::size_t>(i) * neta_ + j].real() * scale;
      }
  }

  // Psi(xi, eta_1) = int exp(-Phi(xi, (eta_1, eta_2))) d eta_2
  double psi(double x1, double x2, double e1) const {
    const double alpha = 2.0 * s_;
    double A = x1 * x1 + x2 * x2;
    // split where (eta_1, eta_2) crosses the segment [0, xi], else near the minimizer
    double lam = A > 0 ? std::clamp((x1 * e1) / std::max(x1 * x1, 1e-300), 0.0, 1.0) : 0.0;
    if (std::abs(x1) < 1e-300) lam = 0.5;
    double cpt = lam * x2;
    double Y = std::pow(45.0 * (alpha + 1.0), 1.0 / alpha) + std::sqrt(A);
    const Rule& g = gauss_legendre(spec_.eta2_nodes);
    double acc = 0.0;
    for (int side = -1; side <= 1; side += 2)
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        double wq = 0.5 * (g.x[i] + 1.0);
        double e2 = cpt + side * Y * wq * wq;
        double B = x1 * e1 + x2 * e2, C = e1 * e1 + e2 * e2;
        acc += 0.5 * g.w[i] * 2.0 * Y * wq * std::exp(-kolmogorov_phi(A, B, C, alpha));
      }
    return acc;
  }

  void build2() {
    n_ = {nxi_, nxi_, neta_};
    h_ = {P_ / nxi_, P_ / nxi_, P_ / neta_};
    std::size_t total = static_cast<std::size_t>(nxi_) * nxi_ * neta_;
    if (total > spec_.budget) throw NumericalError("Kolmogorov frequency box exceeds the FFT memory budget");
    std::vector<cplx> buf(total);
    auto at = [&](int i, int j, int k) -> cplx& { return buf[(static_cast<std::size_t>(i) * nxi_ + j) * neta_ + k]; };
    auto neg = [](int j, int n) { return (n - j) % n; };
    // Psi(xi1, -xi2, e1) = Psi(xi1, xi2, e1) and Psi(-xi, -e1) = Psi(xi, e1)
    for (int i = 0; i < nxi_; ++i)
      for (int j = 0; j <= nxi_ / 2; ++j)
        for (int k = 0; k <= neta_ / 2; ++k) {
          double x1 = fft_freq(i, nxi_, P_), x2 = fft_freq(j, nxi_, P_), e1 = fft_freq(k, neta_, P_);
          double val = psi(x1, x2, e1);
          at(i, j, k) = val;
          at(i, neg(j, nxi_), k) = val;
          at(neg(i, nxi_), neg(j, nxi_), neg(k, neta_)) = val;
          at(neg(i, nxi_), j, neg(k, neta_)) = val;
        }
    Fft fft({nxi_, nxi_, neta_});
    fft.backward(buf.data());
    double dxi = 2.0 * std::numbers::pi / P_;
    double scale = static_cast<double>(total) * dxi * dxi * dxi / std::pow(2.0 * std::numbers::pi, 4);
    vals_.assign(total, 0.0);
    for (int i = 0; i < nxi_; ++i)
      for (int j = 0; j < nxi_; ++j)
        for (int k = 0; k < neta_; ++k) {
          int ci = (i + nxi_ / 2) % nxi_, cj = (j + nxi_ / 2) % nxi_, ck = (k + neta_ / 2) % neta_;
          vals_[(static_cast<std::size_t>(ci) * nxi_ + cj) * neta_ + ck] = at(i, j, k).real() * scale;
        }
  }

  int d_;
  double s_;
  KolmogorovSpec spec_;
  double Xi_, Eta_, P_;
  int nxi_ = 0, neta_ = 0;
  std::vector<int> n_;
  std::vector<double> h_;
  std::vector<double> vals_;
};

inline double kolmogorov_kernel(const Vec& x, const Vec& v, double s, const KolmogorovSpec& spec = {}) {
  KolmogorovKernel K(static_cast<int>(x.size()), s, spec);
  return K(x, v);
}

// ---------------------------------------------------------------------------------------------
// Sweeps against the analytic bounds for the Landau kernel

namespace detail {

/// Deterministic points on S^{D-1} from a rank-1 lattice mapped through the Gaussian inverse CDF.
inline std::vector<std::vector<double>> sphere_points(int D, int count, unsigned seed) {
  std::vector<std::vector<double>> pts;
  std::vector<double> alpha(D);
  // Kronecker sequence with the generalized golden ratio
  double phi = 2.0;
  for (int it = 0; it < 50; ++it) phi = std::pow(1.0 + phi, 1.0 / (D + 1));
  for (int a = 0; a < D; ++a) alpha[a] = std::fmod(std::pow(1.0 / phi, a + 1), 1.0);
  for (int i = 0; i < count; ++i) {
    std::vector<double> y(D);
    double nn = 0.0;
    for (int a = 0; a < D; ++a) {
      double u = std::fmod(0.5 + (i + 1 + seed) * alpha[a], 1.0);
      u = std::clamp(u, 1e-12, 1.0 - 1e-12);
      y[a] = std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
      nn += y[a] * y[a];
    }
    nn = std::sqrt(nn);
    for (double& c : y) c /= nn;
    pts.push_back(y);
  }
  return pts;
}

inline double inf_bracket_on_segment(const Vec& x, const Vec& v, double t, const Vec& v0) {
  // sigma -> [x + sigma t v]_{v0} is convex: golden-section search
  auto f = [&](double s) { return bracket_metric(x + s * t * v, v0); };
  double a = 0.0, b = 1.0;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 60; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return std::min({f(0.0), f(1.0), fc, fd});
}

}  // namespace detail

struct SandwichCase {
  double t = 0.0, r = 0.0;
  double c_lo = 0.0, c_hi = 0.0;   // min / max of q / Q_env
  double pref_ratio = 0.0;         // exact prefactor / (<v0>^2 t^{-d} hat t^{-d})
  double pref_ratio_literal = 0.0; // same with tilde t in place of hat t
};

struct SandwichReport {
  std::vector<SandwichCase> cases;
  double c1 = 0.0, c2 = 0.0;            // global exponent pair
  double lower = 0.0, upper = 0.0;      // envelope constants over the verification cloud
  double max_rel_change = 0.0;          // refinement drift of (c1, c2, lower, upper)
  bool in_range(double lim = 50.0) const { return lower >= 1.0 / lim && upper <= lim && lower > 0.0; }
};

/// Search the exponent pair (c1, c2) with
/// C_lo exp(-c2 Q) <= H / (<v0>^2 t^{-d} hat t^{-d}) <= C_hi exp(-c1 Q),  Q = [x]^2/(t^2 hat t) + [v]^2/hat t.
inline SandwichReport gaussian_sandwich(const Multiplier& m, const std::vector<double>& ts, const std::vector<double>& rs,
                                        int directions = 4000, int cloud = 4000) {
  const ModelParams& p = m.params();
  const int d = p.d;
  auto run = [&](int ndir, int ncloud, unsigned seed) {
    SandwichReport rep;
    rep.c1 = 1e300;
    rep.c2 = 0.0;
    auto dirs = detail::sphere_points(2 * d, ndir, seed);
    for (double t : ts)
      for (double r : rs) {
        Vec v0 = Vec::Zero(d);
        v0(d - 1) = r;
        LandauKernel L(m, t, v0);
        TimeScales ts_ = time_scales(p, t, r);
        double br = japanese(r);
        SandwichCase c{t, r, 1e300, 0.0, 0.0, 0.0};
        double env = br * br * std::pow(t, -d) * std::pow(ts_.hat_t, -d);
        c.pref_ratio = L.prefactor() / env;
        c.pref_ratio_literal = L.prefactor() / (br * br * std::pow(t, -d) * std::pow(ts_.tilde_t, -d));
        for (const auto& y : dirs) {
          Vec x(d), v(d);
          for (int k = 0; k < d; ++k) {
            x(k) = y[k] * std::sqrt(L.c(k) * t * t * t);
            v(k) = y[d + k] * std::sqrt(L.c(k) * t);
          }
          double q = L.exponent(x, v);
          double bx = bracket_metric(x, v0), bv = bracket_metric(v, v0);
          double Q = bx * bx / (t * t * ts_.hat_t) + bv * bv / ts_.hat_t;
          c.c_lo = std::min(c.c_lo, q / Q);
          c.c_hi = std::max(c.c_hi, q / Q);
        }
        rep.c1 = std::min(rep.c1, c.c_lo);
        rep.c2 = std::max(rep.c2, c.c_hi);
        rep.cases.push_back(c);
      }
    // verify the envelope on a radial cloud with the global pair
    rep.lower = 1e300;
    rep.upper = 0.0;
    auto cl = detail::sphere_points(2 * d, ncloud, seed + 7919);
    for (double t : ts)
      for (double r : rs) {
        Vec v0 = Vec::Zero(d);
        v0(d - 1) = r;
        LandauKernel L(m, t, v0);
        TimeScales ts_ = time_scales(p, t, r);
        double br = japanese(r);
        double env = br * br * std::pow(t, -d) * std::pow(ts_.hat_t, -d);
        for (std::size_t i = 0; i < cl.size(); ++i) {
          double rad = 3.0 * std::sqrt((i + 0.5) / cl.size());
          Vec x(d), v(d);
          for (int k = 0; k < d; ++k) {
            x(k) = rad * cl[i][k] * std::sqrt(L.c(k) * t * t * t);
            v(k) = rad * cl[i][d + k] * std::sqrt(L.c(k) * t);
          }
          double H = L(x, v);
          double bx = bracket_metric(x, v0), bv = bracket_metric(v, v0);
          double Q = bx * bx / (t * t * ts_.hat_t) + bv * bv / ts_.hat_t;
          rep.lower = std::min(rep.lower, H / (env * std::exp(-rep.c2 * Q)));
          rep.upper = std::max(rep.upper, H / (env * std::exp(-rep.c1 * Q)));
        }
      }
    return rep;
  };
  SandwichReport a = run(directions, cloud, 0);
  SandwichReport b = run(2 * directions, 2 * cloud, 101);
  auto rel = [](double u, double w) { return std::abs(u - w) / std::max(std::abs(u), std::abs(w)); };
  b.max_rel_change = std::max({rel(a.c1, b.c1), rel(a.c2, b.c2), rel(a.lower, b.lower), rel(a.upper, b.upper)});
  return b;
}

struct BoundEntry {
  int m = 0, n = 0;
  double t = 0.0, r = 0.0;
  double sup_ratio = 0.0;
  double refined_sup_ratio = 0.0;
  bool stable() const {
    return std::isfinite(sup_ratio) && std::abs(refined_sup_ratio - sup_ratio) <= 0.1 * std::max(sup_ratio, refined_sup_ratio);
  }
};

/// |D^{m,n} H| / (Psi Phi / (t^n tilde t^{(m+n)/2s})) for (m, n) in {(0,0), (1,0), (0,1)} over a cloud (s = 1).
inline std::vector<BoundEntry> landau_bound_report(const Multiplier& m, const std::vector<double>& ts,
                                                   const std::vector<double>& rs, int cloud = 3000, int N = 4) {
  const ModelParams& p = m.params();
  const int d = p.d;
  const double s = p.s;
  std::vector<BoundEntry> out;
  auto sweep = [&](double t, double r, int mm, int nn, int count, unsigned seed) {
    Vec v0 = Vec::Zero(d);
    v0(d - 1) = r;
    LandauKernel L(m, t, v0);
    TimeScales sc = time_scales(p, t, r);
    double br = japanese(r);
    auto ratio = [&](const std::vector<double>& y) {
      Vec x(d), v(d);
      for (int k = 0; k < d; ++k) {
        x(k) = y[k] * std::sqrt(L.c(k) * t * t * t);
        v(k) = y[d + k] * std::sqrt(L.c(k) * t);
      }
      double val;
      if (mm == 0 && nn == 0) {
        val = std::abs(L(x, v));
      } else {
        auto [gx, gv] = L.frame_gradient(x, v);  // frame = lab here (v0 on the last axis)
        Vec g = mm == 1 ? gv : gx;
        for (int k = 0; k < d - 1; ++k) g(k) *= br;
        val = g.norm();
      }
      double th = std::pow(sc.hat_t, 1.0 / (2.0 * s));
      double infb = detail::inf_bracket_on_segment(x, v, t, v0);
      double Psi = std::pow(t, -d) * std::pow(sc.hat_t, -d / (2.0 * s)) * br *
                   std::pow(japanese(bracket_metric(x, v0) / t), -N) * std::pow(japanese(infb / (t * th)), -(d + s));
      double Phi = std::pow(sc.hat_t, -d / (2.0 * s)) * br * std::pow(japanese(bracket_metric(v, v0)), -N) *
                   std::pow(japanese(bracket_metric(v, v0) / th), -(d + s));
      double bound = Psi * Phi / (std::pow(t, nn) * std::pow(sc.tilde_t, (mm + nn) / (2.0 * s)));
      return val / bound;
    };
    auto pts = detail::sphere_points(2 * d, count, seed);
    std::vector<std::pair<double, std::vector<double>>> best;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double rad = 8.0 * std::sqrt((i + 0.5) / pts.size());
      std::vector<double> y = pts[i];
      for (double& c : y) c *= rad;
      best.emplace_back(ratio(y), y);
    }
    std::sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    double sup = 0.0;
    // pattern-search polish from the leading candidates
    for (std::size_t b = 0; b < std::min<std::size_t>(8, best.size()); ++b) {
      auto [f, y] = best[b];
      for (double step = 0.25; step > 1e-4; step *= 0.5) {
        bool moved = true;
        while (moved) {
          moved = false;
          for (int a = 0; a < 2 * d; ++a)
            for (double sg : {-1.0, 1.0}) {
              auto z = y;
              z[a] += sg * step;
              double fz = ratio(z);
              if (fz > f) {
                f = fz;
                y = z;
                moved = true;
              }
            }
        }
      }
      sup = std::max(sup, f);
    }
    return sup;
  };
  for (double t : ts)
    for (double r : rs)
      for (auto [mm, nn] : {std::pair{0, 0}, std::pair{1, 0}, std::pair{0, 1}}) {
        BoundEntry e{mm, nn, t, r, sweep(t, r, mm, nn, cloud, 3), sweep(t, r, mm, nn, 2 * cloud, 17)};
        out.push_back(e);
      }
  return out;
}


// ---------------------------------------------------------------------------------------------
// Equivalence sweeps

struct KolmogorovBound {
  int n = 0;
  double L = 0.0;
  double sup = 0.0;
  Vec x_arg, v_arg;
  double min_weighted = 0.0;  // most negative weighted value (ringing diagnostic)
};

/// sup of |K(x,v)| <x,v>^{d+1+2s} <inf_sigma |x + sigma v|>^{d-1+2s} on n points per axis of [-L, L]^{2d}
inline KolmogorovBound kolmogorov_bound_sweep(const KolmogorovKernel& K, int n, double L) {
  const int d = K.d();
  const double s = K.s();
  KolmogorovBound out;
  out.n = n;
  out.L = L;
  std::vector<double> c(n);
  for (int i = 0; i < n; ++i) c[i] = n == 1 ? 0.0 : -L + 2.0 * L * i / (n - 1);
  std::size_t total = 1;
  for (int a = 0; a < 2 * d; ++a) total *= n;
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    Vec x(d), v(d);
    for (int a = 2 * d - 1; a >= 0; --a) {
      double y = c[rem % n];
      rem /= n;
      if (a < d) x(a) = y;
      else v(a - d) = y;
    }
    double vv = v.squaredNorm();
    double sg = vv > 0.0 ? std::clamp(-x.dot(v) / vv, 0.0, 1.0) : 0.0;
    double w = std::pow(japanese(x, v), d + 1 + 2.0 * s) * std::pow(japanese((x + sg * v).norm()), d - 1 + 2.0 * s);
    double k = K(x, v);
    if (std::abs(k) * w > out.sup) {
      out.sup = std::abs(k) * w;
      out.x_arg = x;
      out.v_arg = v;
    }
    out.min_weighted = std::min(out.min_weighted, k * w);
  }
  return out;
}

struct EquivalenceRange {
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  void add(double r) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  double spread() const { return hi / lo; }
  bool finite() const { return std::isfinite(lo) && std::isfinite(hi) && lo > 0.0; }
};

/// frak_c(a) / (1+a)^{1-kappa} over a in {0} and n log-spaced points on [a_max 1e-3, a_max]; d = 3
inline EquivalenceRange frak_c_equivalence(const Multiplier& m, double a_max = 50.0, int n = 60) {
  const double k = m.kappa();
  EquivalenceRange r;
  r.add(m.frak_c_direct(0.0));
  for (int i = 0; i < n; ++i) {
    double a = a_max * std::pow(10.0, -3.0 * (n - 1 - i) / std::max(1, n - 1));
    r.add(m.frak_c_direct(a) / std::pow(1.0 + a, 1.0 - k));
  }
  return r;
}

/// E^s(z,v0) / (<v0>^{-kappa} [[z]]^{2s} min{1,[[z]]}^{2-2s}) over |z| in [zmin, zmax] (log grid) and
/// angles in [0, pi/2] against v0 = |v0| e_d; d = 2 sweeps a quarter circle, d = 3 a meridian
inline EquivalenceRange symbol_equivalence(const Multiplier& m, const std::vector<double>& v0_norms, int n_radii = 21,
                                           int n_angles = 17, double zmin = 1e-2, double zmax = 10.0) {
  const ModelParams& p = m.params();
  const int d = p.d;
  const double s = p.s, k = p.kappa();
  EquivalenceRange out;
  for (double r0 : v0_norms) {
    Vec v0 = Vec::Zero(d);
    v0(d - 1) = r0;
    for (int i = 0; i < n_radii; ++i) {
      double zn = zmin * std::pow(zmax / zmin, double(i) / std::max(1, n_radii - 1));
      for (int j = 0; j < n_angles; ++j) {
        double ph = 0.5 * std::numbers::pi * j / std::max(1, n_angles - 1);
        Vec z = Vec::Zero(d);
        z(0) = zn * std::cos(ph);
        z(d - 1) = zn * std::sin(ph);
        double sm = shear_metric(z, v0);
        double env = std::pow(japanese(r0), -k) * std::pow(sm, 2.0 * s) * std::pow(std::min(1.0, sm), 2.0 - 2.0 * s);
        out.add(m.symbol(z, v0) / env);
      }
    }
  }
  return out;
}

}  // namespace kk

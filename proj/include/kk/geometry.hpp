#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "params.hpp"

namespace kk {

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;

inline double japanese(double r) { return std::sqrt(1.0 + r * r); }
inline double japanese(const Vec& v) { return std::sqrt(1.0 + v.squaredNorm()); }
inline double japanese(const Vec& x, const Vec& v) {
  return std::sqrt(1.0 + x.squaredNorm() + v.squaredNorm());
}

inline Vec vec(std::initializer_list<double> c) {
  Vec v(static_cast<Eigen::Index>(c.size()));
  Eigen::Index i = 0;
  for (double a : c) v(i++) = a;
  return v;
}

inline Vec unit(int d, int k) {
  Vec e = Vec::Zero(d);
  e(k) = 1.0;
  return e;
}

/// [x]_v = |x| + |x.v|
inline double bracket_metric(const Vec& x, const Vec& v) { return x.norm() + std::abs(x.dot(v)); }

/// [[z]]_{v0} = (|z|^2 - <v0>^{-2} |v0.z|^2)^{1/2}
inline double shear_metric(const Vec& z, const Vec& v0) {
  double p = v0.dot(z);
  double q = z.squaredNorm() - p * p / (1.0 + v0.squaredNorm());
  return std::sqrt(std::max(q, 0.0));
}

struct AnisotropicFrame {
  Vec v0;
  Vec vhat0;
  double bracket = 1.0;
  Mat Q;  // orthonormal, Q e_d = vhat0
  Mat O;  // P + <v0> Pi

  int dim() const { return static_cast<int>(v0.size()); }
  double r() const { return v0.norm(); }
  /// coordinates in the frame where v0 = |v0| e_d
  Vec to_frame(const Vec& x) const { return Q.transpose() * x; }
  Vec from_frame(const Vec& y) const { return Q * y; }
};

inline AnisotropicFrame make_frame(const Vec& v0) {
  const int d = static_cast<int>(v0.size());
  AnisotropicFrame f;
  f.v0 = v0;
  const double r = v0.norm();
  f.bracket = japanese(r);
  f.vhat0 = Vec::Zero(d);
  f.Q = Mat::Identity(d, d);
  f.O = Mat::Identity(d, d);
  if (r == 0.0) return f;
  f.vhat0 = v0 / r;
  Vec ed = unit(d, d - 1);
  Vec u = ed - f.vhat0;
  if (u.norm() > 1e-14) {
    // Householder reflection taking e_d to vhat0, composed with a flip of e_1 to keep det = +1.
    Mat H = Mat::Identity(d, d) - 2.0 * u * u.transpose() / u.squaredNorm();
    Mat F = Mat::Identity(d, d);
    F(0, 0) = -1.0;
    f.Q = H * F;
  }
  Mat P = f.vhat0 * f.vhat0.transpose();
  f.O = P + f.bracket * (Mat::Identity(d, d) - P);
  return f;
}

/// All d x d rotations fixing v0 are generated by these for d = 2 (reflection) and d = 3 (axis rotation).
inline Mat rotation_fixing(const AnisotropicFrame& f, double angle) {
  const int d = f.dim();
  Mat R = Mat::Identity(d, d);
  if (d == 3) {
    Mat Rf = Mat::Identity(3, 3);
    Rf(0, 0) = std::cos(angle);
    Rf(0, 1) = -std::sin(angle);
    Rf(1, 0) = std::sin(angle);
    Rf(1, 1) = std::cos(angle);
    R = f.Q * Rf * f.Q.transpose();
  } else if (d == 2 && f.r() > 0.0) {
    Mat Rf = Mat::Identity(2, 2);
    Rf(0, 0) = -1.0;  // the only nontrivial isometry fixing v0 in 2D
    R = f.Q * Rf * f.Q.transpose();
  } else if (d == 2) {
    R(0, 0) = std::cos(angle);
    R(0, 1) = -std::sin(angle);
    R(1, 0) = std::sin(angle);
    R(1, 1) = std::cos(angle);
  }
  return R;
}

struct TimeScales {
  double t = 0.0;
  double tilde_t = 0.0;
  double hat_t = 0.0;
};

inline TimeScales time_scales(const ModelParams& p, double t, double vnorm) {
  TimeScales ts;
  ts.t = t;
  double b = japanese(vnorm);
  ts.tilde_t = std::pow(b, p.gamma) * t;
  ts.hat_t = std::pow(b, -p.kappa()) * t;
  return ts;
}

/// Amplitude factor lambda^{-nu(d+gamma)-1} of the scaling F_lambda.
inline double scaling_amplitude(const ModelParams& p, double lambda, double nu) {
  return std::pow(lambda, -nu * (p.d + p.gamma) - 1.0);
}

}  // namespace kk

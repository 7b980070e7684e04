#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "geometry.hpp"
#include "params.hpp"

namespace kk {

struct Ball {
  Vec c;
  double R = std::numeric_limits<double>::infinity();
};

/// A velocity function with first and second derivatives and a support description.
struct VFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
  std::vector<Ball> support;  // empty: numerically supported in |v| <= global truncation

  double operator()(const Vec& v) const { return value(v); }
  bool compact() const { return !support.empty(); }
};

/// parameter intervals {tau : |p + tau e - c| <= R} merged over the support balls
inline std::vector<std::pair<double, double>> line_support(const VFunction& f, const Vec& p, const Vec& e, double trunc) {
  std::vector<std::pair<double, double>> iv;
  auto add = [&](const Vec& c, double R) {
    Vec q = p - c;
    double b = q.dot(e), cc = q.squaredNorm() - R * R;
    double disc = b * b - cc;
    if (disc <= 0) return;
    double s = std::sqrt(disc);
    iv.emplace_back(-b - s, -b + s);
  };
  if (f.support.empty()) add(Vec::Zero(p.size()), trunc);
  for (const Ball& B : f.support) add(B.c, std::isfinite(B.R) ? B.R : trunc);
  std::sort(iv.begin(), iv.end());
  std::vector<std::pair<double, double>> out;
  for (auto& I : iv) {
    if (!out.empty() && I.first <= out.back().second) out.back().second = std::max(out.back().second, I.second);
    else out.push_back(I);
  }
  return out;
}

/// support radius around v: max |v - c| + R over the support balls
inline double reach(const VFunction& f, const Vec& v, double trunc) {
  if (f.support.empty()) return v.norm() + trunc;
  double r = 0.0;
  for (const Ball& B : f.support) r = std::max(r, (v - B.c).norm() + (std::isfinite(B.R) ? B.R : trunc));
  return r;
}

inline VFunction gaussian_fn(const Vec& center, double sigma, double amp) {
  VFunction f;
  auto g = [=](const Vec& v) { return amp * std::exp(-0.5 * (v - center).squaredNorm() / (sigma * sigma)); };
  f.value = g;
  f.grad = [=](const Vec& v) -> Vec { return -g(v) * (v - center) / (sigma * sigma); };
  f.hess = [=](const Vec& v) -> Mat {
    Vec y = (v - center) / (sigma * sigma);
    const int d = static_cast<int>(v.size());
    return g(v) * (y * y.transpose() - Mat::Identity(d, d) / (sigma * sigma));
  };
  return f;
}

inline VFunction maxwellian_fn(int d) {
  return gaussian_fn(Vec::Zero(d), 1.0, std::pow(2.0 * std::numbers::pi, -0.5 * d));
}

/// amp * exp(1 - 1/(1 - |v-c|^2/R^2)) inside the ball, 0 outside
inline VFunction bump_fn(const Vec& center, double R, double amp) {
  VFunction f;
  // g(u) = exp(1 - 1/(1-u)), u = |y|^2/R^2
  auto parts = [=](const Vec& v, double& g, double& g1, double& g2) {
    double u = (v - center).squaredNorm() / (R * R);
    if (u >= 1.0) {
      g = g1 = g2 = 0.0;
      return false;
    }
    double w = 1.0 / (1.0 - u);
    g = amp * std::exp(1.0 - w);
    g1 = -g * w * w;                               // dg/du
    g2 = g * (w * w * w * w - 2.0 * w * w * w);    // d2g/du2
    return true;
  };
  f.value = [=](const Vec& v) {
    double g, g1, g2;
    parts(v, g, g1, g2);
    return g;
  };
  f.grad = [=](const Vec& v) -> Vec {
    double g, g1, g2;
    if (!parts(v, g, g1, g2)) return Vec::Zero(v.size());
    return g1 * 2.0 * (v - center) / (R * R);
  };
  f.hess = [=](const Vec& v) -> Mat {
    double g, g1, g2;
    const int d = static_cast<int>(v.size());
    if (!parts(v, g, g1, g2)) return Mat::Zero(d, d);
    Vec du = 2.0 * (v - center) / (R * R);
    return g2 * du * du.transpose() + g1 * 2.0 / (R * R) * Mat::Identity(d, d);
  };
  f.support.push_back({center, R});
  return f;
}

inline VFunction linear_combination(const std::vector<std::pair<double, VFunction>>& terms) {
  VFunction f;
  auto t = std::make_shared<std::vector<std::pair<double, VFunction>>>(terms);
  f.value = [t](const Vec& v) {
    double s = 0.0;
    for (auto& [a, g] : *t) s += a * g.value(v);
    return s;
  };
  f.grad = [t](const Vec& v) -> Vec {
    Vec s = Vec::Zero(v.size());
    for (auto& [a, g] : *t) s += a * g.grad(v);
    return s;
  };
  f.hess = [t](const Vec& v) -> Mat {
    const int d = static_cast<int>(v.size());
    Mat s = Mat::Zero(d, d);
    for (auto& [a, g] : *t) s += a * g.hess(v);
    return s;
  };
  bool all_compact = true;
  for (auto& [a, g] : terms) {
    if (!g.compact()) all_compact = false;
    else
      for (const Ball& B : g.support) f.support.push_back(B);
  }
  if (!all_compact) f.support.clear();
  return f;
}

inline VFunction scaled(const VFunction& g, double a) { return linear_combination({{a, g}}); }

/// f g with product-rule derivatives; support is that of the compact factor
inline VFunction product(const VFunction& f, const VFunction& g) {
  VFunction h;
  h.value = [=](const Vec& v) { return f.value(v) * g.value(v); };
  h.grad = [=](const Vec& v) -> Vec { return f.grad(v) * g.value(v) + f.value(v) * g.grad(v); };
  h.hess = [=](const Vec& v) -> Mat {
    Vec a = f.grad(v), b = g.grad(v);
    return f.hess(v) * g.value(v) + f.value(v) * g.hess(v) + a * b.transpose() + b * a.transpose();
  };
  h.support = f.compact() ? f.support : g.support;
  return h;
}

/// Gaussian times a bump of radius cut * sigma: smooth, compactly supported, Gaussian-like
inline VFunction gaussian_bump_fn(const Vec& center, double sigma, double amp, double cut = 6.0) {
  return product(gaussian_fn(center, sigma, amp), bump_fn(center, cut * sigma, 1.0));
}

/// Random smooth compactly supported field: a sum of truncated Gaussians with random centres, widths and weights.
inline VFunction random_smooth_field(int d, unsigned seed, int terms = 3) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uc(-1.0, 1.0), us(0.5, 0.9), ua(0.3, 1.0);
  std::vector<std::pair<double, VFunction>> t;
  for (int i = 0; i < terms; ++i) {
    Vec c(d);
    for (int k = 0; k < d; ++k) c(k) = uc(rng);
    double sig = us(rng), amp = ua(rng);
    t.push_back({1.0, gaussian_bump_fn(c, sig, amp)});
  }
  return linear_combination(t);
}

/// 2D rotation (d = 2) or rotation about e_3 (d = 3) by angle a
inline Mat rotation_matrix(int d, double a) {
  Mat R = Mat::Identity(d, d);
  R(0, 0) = std::cos(a);
  R(0, 1) = -std::sin(a);
  R(1, 0) = std::sin(a);
  R(1, 1) = std::cos(a);
  return R;
}

/// f o R^T, i.e. the field rotated by R
inline VFunction rotated(const VFunction& f, const Mat& R) {
  VFunction g;
  Mat Rt = R.transpose();
  g.value = [=](const Vec& v) { return f.value(Rt * v); };
  g.grad = [=](const Vec& v) -> Vec { return R * f.grad(Rt * v); };
  g.hess = [=](const Vec& v) -> Mat { return R * f.hess(Rt * v) * Rt; };
  for (const Ball& B : f.support) g.support.push_back({R * B.c, B.R});
  return g;
}

}  // namespace kk

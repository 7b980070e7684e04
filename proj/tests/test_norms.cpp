#include <gtest/gtest.h>

#include <cmath>

#include "kk/norms.hpp"

using namespace kk;

namespace {
const ModelParams P = ModelParams::make(2, 0.5, -2.8);  // kappa = 1.8
}

TEST(AnisotropicRiesz, TruncatedConstantAtZeroV0) {
  AnisotropicRiesz A(P);
  auto one = [](const Vec&) { return 1.0; };
  double v = A.integral(one, vec({0.2, -0.1}), Vec::Zero(2), true, 1.0, 1.0);
  EXPECT_NEAR(v, 2.0 * std::numbers::pi / (2.0 - 1.8), 1e-6 * v);
}

TEST(AnisotropicRiesz, UntruncatedGaussianAtZeroV0) {
  // 2 pi 2^{-kappa/2} Gamma(1 - kappa/2)
  AnisotropicRiesz A(P);
  auto g = [](const Vec& w) { return std::exp(-0.5 * w.squaredNorm()); };
  double exact = 2.0 * std::numbers::pi * std::pow(2.0, -0.9) * std::tgamma(0.1);
  EXPECT_NEAR(exact, 32.0327, 1e-4);
  double v = A.integral(g, Vec::Zero(2), Vec::Zero(2), false, 1.0, 12.0);
  EXPECT_NEAR(v / exact, 1.0, 1e-6);
}

TEST(AnisotropicRiesz, LargeV0ApproachesLimit) {
  AnisotropicRiesz A(P);
  auto g = [](const Vec& w) { return std::exp(-0.5 * w.squaredNorm()); };
  Vec e = vec({0.6, 0.8}), v = vec({0.1, 0.2});
  double lim = A.limit(g, v, e, true, 1.0, 1.0);
  double a = 2000.0;
  double far = std::sqrt(1.0 + a * a) * A.integral(g, v, a * e, true, 1.0, 1.0);
  EXPECT_NEAR(far / lim, 1.0, 1e-2);
}

TEST(Functional, RequiresKappaAboveOne) {
  PhaseFunction F = phase_gaussian(Vec::Zero(2), 1.0, Vec::Zero(2), 1.0, 1.0);
  EXPECT_THROW(scaling_invariant_functional(F, ModelParams::make(2, 0.5, -1.5), {}), ValidationError);
}

TEST(Weights, TrivialAndInvalid) {
  WeightSpec w;
  EXPECT_EQ(w(vec({3.0, 1.0}), vec({-2.0, 5.0})), 1.0);
  w.varkappa1 = -1.0;
  EXPECT_THROW(w.validate(), ValidationError);
}

TEST(CriticalNorm, ZeroField) {
  PhaseGrid g;
  g.d = 2;
  g.nx = 2;
  g.nv = 8;
  KineticField f(g);
  EXPECT_EQ(critical_norm(f, P, WeightSpec{}).value, 0.0);
}

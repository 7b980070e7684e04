#include <gtest/gtest.h>

#include <cmath>

#include "kk/kernels.hpp"
#include "kk/semigroup.hpp"

using namespace kk;

TEST(Kolmogorov, LandauBranchMatchesGaussian) {
  KolmogorovKernel K(1, 1.0);
  auto exact = [](double x, double v) {
    return std::sqrt(3.0) / (2.0 * std::numbers::pi) * std::exp(-3.0 * x * x - 3.0 * x * v - v * v);
  };
  // grid nodes carry the inversion error only
  const double hx = K.period() / K.dims()[0], hv = K.period() / K.dims()[1];
  for (int i = -4; i <= 4; ++i)
    for (int j = -4; j <= 4; ++j) EXPECT_NEAR(K(vec({i * hx}), vec({j * hv})), exact(i * hx, j * hv), 1e-5);
  // off-node values add the cubic interpolation error
  const double peak = exact(0.0, 0.0);
  for (double x : {-1.0, -0.3, 0.4, 1.1})
    for (double v : {-1.5, 0.7, 2.0}) EXPECT_NEAR(K(vec({x}), vec({v})), exact(x, v), 2.5e-2 * peak);
}

TEST(Kolmogorov, RejectsBadOrder) {
  EXPECT_THROW(KolmogorovKernel(1, 0.0), ValidationError);
  EXPECT_THROW(KolmogorovKernel(3, 0.5), ValidationError);
}

TEST(LandauKernel, PositiveWithUnitMass) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  const double t = 0.8;
  Vec v0 = vec({1.0, -0.5});
  LandauKernel K(m, t, v0);
  const int n = 28;
  const double L = 5.0, h = 2.0 * L / (n - 1);
  double mass = 0.0;
  double lo = 1.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int e = 0; e < n; ++e) {
          Vec x = vec({-L + a * h, -L + b * h}), v = vec({-L + c * h, -L + e * h});
          double k = K(x, v);
          lo = std::min(lo, k);
          mass += k;
        }
  mass *= std::pow(h, 4);
  EXPECT_GE(lo, 0.0);
  EXPECT_GT(K(Vec::Zero(2), Vec::Zero(2)), 0.0);
  EXPECT_NEAR(mass, 1.0, 1e-6);
  EXPECT_THROW(LandauKernel(m, 0.0, v0), ValidationError);
}

TEST(LandauKernel, SymmetryUnderReflection) {
  Multiplier m(ModelParams::make(3, 1.0, -3.0));
  Vec v0 = vec({0.3, 0.2, 1.0}), x = vec({0.2, -0.1, 0.4}), v = vec({-0.5, 0.3, 0.1});
  EXPECT_NEAR(landau_kernel(m, 1.3, x, v, v0), landau_kernel(m, 1.3, -x, -v, v0), 1e-15);
}

namespace {

PhaseGrid small_grid() {
  PhaseGrid g;
  g.d = 2;
  g.nx = 4;
  g.nv = 32;
  g.V = 6.0;
  return g;
}

KineticField bump(const PhaseGrid& g) {
  return KineticField::sample(g, [](const Vec& x, const Vec& v) {
    return std::exp(-v.squaredNorm()) * (1.0 + 0.4 * std::cos(x(0)) + 0.2 * std::sin(x(1)));
  });
}

}  // namespace

TEST(Semigroup, ConservesMass) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  PhaseGrid g = small_grid();
  LinearSemigroup S(m, g, vec({0.5, 0.5}));
  KineticField f = bump(g);
  KineticField u = S.apply(f, 0.4);
  EXPECT_NEAR(u.moments().m[0], f.moments().m[0], 1e-9 * f.moments().m[0]);
}

TEST(Semigroup, Composition) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  PhaseGrid g = small_grid();
  LinearSemigroup S(m, g, vec({0.5, 0.5}));
  KineticField f = bump(g);
  // short times keep the sheared spectrum inside the v-Nyquist band
  KineticField a = S.apply(S.apply(f, 0.02), 0.03);
  KineticField b = S.apply(f, 0.05);
  EXPECT_LT((a - b).max_abs(), 1e-10 * f.max_abs());
}

TEST(Semigroup, ZeroTimeIsIdentity) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  PhaseGrid g = small_grid();
  LinearSemigroup S(m, g, vec({0.0, 0.0}));
  KineticField f = bump(g);
  EXPECT_LT((S.apply(f, 0.0) - f).max_abs(), 1e-13);
}

TEST(FreeTransport, ShiftsAlongVelocity) {
  PhaseGrid g = small_grid();
  KineticField f = bump(g);
  KineticField a = free_transport(free_transport(f, 0.3), 0.2);
  EXPECT_LT((a - free_transport(f, 0.5)).max_abs(), 1e-12);
}

#include <gtest/gtest.h>

#include <cmath>

#include "kk/collision.hpp"
#include "kk/landau_grid.hpp"

using namespace kk;

TEST(RieszGaussian, ZeroOrderIsIdentity) {
  Vec c = vec({0.3, -0.2});
  for (Vec v : {vec({0.0, 0.0}), vec({1.0, 0.5}), vec({-2.0, 1.5})}) {
    double g = 0.7 * std::exp(-0.5 * (v - c).squaredNorm() / 0.64);
    EXPECT_NEAR(riesz_gaussian(c, 0.8, 0.7, 1e-12, v), g, 1e-10);
  }
  EXPECT_THROW(riesz_gaussian(c, 1.0, 1.0, 2.0, c), ValidationError);
}

TEST(RieszGaussian, MatchesPolarQuadrature) {
  Multiplier m(ModelParams::make(2, 0.5, -1.5));
  CarlemanOperator op(m);
  Vec c = vec({0.3, -0.2});
  VFunction g = gaussian_fn(c, 0.8, 1.0);
  for (Vec v : {vec({0.0, 0.0}), vec({1.2, 0.4})}) {
    double exact = riesz_gaussian(c, 0.8, 1.0, 0.5, v);
    EXPECT_NEAR(op.riesz(g, v, 0.5) / exact, 1.0, 1e-6);
  }
}

TEST(Carleman, MaxwellianIsEquilibrium) {
  Multiplier m(ModelParams::make(2, 0.5, -1.5));
  CarlemanOperator op(m);
  std::vector<Vec> vs{vec({0.0, 0.0}), vec({0.7, 0.0}), vec({1.0, -1.5}), vec({0.0, 2.2})};
  EXPECT_LT(maxwellian_equilibrium_residual(op, vs), 1e-7);
}

TEST(Carleman, CancellationConstantPositive) {
  Multiplier m(ModelParams::make(2, 0.5, -1.5));
  CarlemanOperator op(m);
  EXPECT_GT(op.cancellation_constant(), 0.0);
  // same constant on a shifted, wider Gaussian
  VFunction g = gaussian_fn(vec({0.4, 0.1}), 1.3, 0.6);
  Vec v = vec({-0.5, 0.8});
  double direct = op.K(g, v);
  double ident = op.K_riesz(g, v);
  EXPECT_NEAR(ident / direct, 1.0, 1e-5);
}

TEST(Carleman, RotationEquivariance) {
  Multiplier m(ModelParams::make(2, 0.5, -1.5));
  CarlemanOperator op(m);
  VFunction f = linear_combination({{1.0, gaussian_fn(vec({0.5, 0.0}), 0.9, 1.0)},
                                    {0.5, gaussian_fn(vec({-0.3, 0.6}), 0.7, 1.0)}});
  Mat R = rotation_matrix(2, 0.9);
  VFunction fr = rotated(f, R);
  Vec v = vec({0.4, -0.6});
  double a = op.q(f, f, v), b = op.q(fr, fr, R * v);
  EXPECT_NEAR(a, b, 1e-6 * std::abs(a));
}

TEST(Carleman, RequiresFractionalBranch) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  CarlemanOperator op(m);
  VFunction mu = maxwellian_fn(2);
  EXPECT_THROW(op.q_main(mu, mu, vec({0.0, 0.0})), ValidationError);
}

TEST(LandauAnalytic, MaxwellianIsEquilibrium) {
  LandauAnalytic L(ModelParams::make(2, 1.0, -2.5));
  VFunction mu = maxwellian_fn(2);
  for (Vec v : {vec({0.3, 0.1}), vec({1.5, -0.7})}) {
    auto [a, b] = L.split(mu, mu, v);
    EXPECT_LT(std::abs(a + b), 1e-8 * std::abs(a));
  }
}

TEST(LandauGrid, MaxwellianIsNearEquilibrium) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  PhaseGrid g;
  g.d = 2;
  g.nx = 1;
  g.nv = 32;
  g.V = 6.0;
  LandauGrid LG(m, g);
  LandauGrid::Slice mu(g.nvs());
  for (std::size_t iv = 0; iv < g.nvs(); ++iv) mu[iv] = maxwellian(g.v_at(iv));
  auto s = LG.q(mu, mu);
  double num = 0.0, den = 0.0;
  for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
    if (g.v_at(iv).norm() > 3.0) continue;
    num = std::max(num, std::abs(s.main[iv] + s.rem[iv]));
    den = std::max(den, std::abs(s.main[iv]));
  }
  EXPECT_LT(num / den, 1e-3);
}

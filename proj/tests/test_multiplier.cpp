#include <gtest/gtest.h>

#include <cmath>

#include "kk/multiplier.hpp"
#include "kk/quadrature.hpp"

using namespace kk;

namespace {

double polar_landau_entry(const Vec& v0, double gamma, int i, int j) {
  // int |z|^{gamma+2} (delta_ij - z_i z_j/|z|^2) mu(v0 - z) dz in d = 2, polar coordinates
  Rule r = gauss_legendre(80, 0.0, 14.0);
  const int nt = 256;
  double acc = 0.0;
  for (std::size_t a = 0; a < r.x.size(); ++a)
    for (int k = 0; k < nt; ++k) {
      double th = 2.0 * std::numbers::pi * k / nt;
      Vec e = vec({std::cos(th), std::sin(th)});
      double P = (i == j ? 1.0 : 0.0) - e(i) * e(j);
      acc += r.w[a] * (2.0 * std::numbers::pi / nt) * std::pow(r.x[a], gamma + 3.0) * P * maxwellian(v0 - r.x[a] * e);
    }
  return acc;
}

}  // namespace

TEST(AngularProfile, ClosedFormMatchesLiteral) {
  AngularProfile pr(ModelParams::make(3, 0.4, -2.0));
  for (double rho : {0.05, 0.2, 0.33, 0.5, 0.8, 0.99}) EXPECT_NEAR(pr.A(rho), pr.A_literal(rho), 1e-13 * pr.A(rho));
  EXPECT_EQ(AngularProfile::chi_tilde(0.75), 1.0);
  EXPECT_EQ(AngularProfile::chi_tilde(1.2), 0.0);
  EXPECT_DOUBLE_EQ(pr.chi(0.5), 1.0);
  EXPECT_DOUBLE_EQ(pr.chi(2.5), 0.0);
}

TEST(Multiplier, FrakCZeroClosedForm) {
  for (double k : {0.5, 1.5, 2.5}) {
    Multiplier m(ModelParams::make(3, 0.5, -k - 1.0));
    EXPECT_NEAR(m.frak_c_direct(0.0) / m.frak_c0_closed(), 1.0, 1e-9) << "kappa " << k;
  }
}

TEST(Multiplier, FrakCRequiresThreeDimensions) {
  Multiplier m(ModelParams::make(2, 0.5, -2.0));
  EXPECT_THROW(m.frak_c(1.0), ValidationError);
}

TEST(Multiplier, FactorizedAngularCoefficient) {
  for (int d : {2, 3}) {
    Multiplier m(ModelParams::make(d, 0.5, -2.0));
    Vec v0 = d == 2 ? vec({0.7, -1.2}) : vec({0.4, 1.1, -0.6});
    Vec th = d == 2 ? vec({0.6, 0.8}) : vec({2.0, -1.0, 2.0}) / 3.0;
    double direct = m.angular_coefficient(v0, th), fast = m.angular_coefficient_fast(v0, th);
    EXPECT_NEAR(fast / direct, 1.0, 1e-6) << "d " << d;
  }
}

TEST(Multiplier, LandauMatrixIsLiteralConvolution) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  for (Vec v0 : {vec({0.0, 0.0}), vec({1.2, -0.5})}) {
    Mat A = m.landau_matrix(v0);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) EXPECT_NEAR(A(i, j), polar_landau_entry(v0, -3.0, i, j), 1e-6);
  }
  EXPECT_NEAR(m.landau_matrix(Vec::Zero(2))(0, 0), m.landau_isotropic_closed(), 1e-9);
}

TEST(Multiplier, LandauSpectrum) {
  Multiplier m(ModelParams::make(3, 1.0, -3.0));
  for (double r : {0.0, 0.5, 3.0, 9.0}) {
    auto [c1, c2] = m.landau_eigen(r);
    auto [d1, d2] = m.landau_eigen_direct(r);
    EXPECT_NEAR(c1 / d1, 1.0, 1e-7);
    EXPECT_NEAR(c2 / d2, 1.0, 1e-7);
    EXPECT_GT(c1, 0.0);
    EXPECT_GT(c2, 0.0);
  }
  // along v0 the diffusion decays faster than across it
  auto [c1, c2] = m.landau_eigen(9.0);
  EXPECT_LT(c2, c1);
  Mat A = m.landau_matrix(vec({1.0, 2.0, -2.0}));
  EXPECT_LT((A - A.transpose()).norm(), 1e-14);
}

TEST(Multiplier, SymbolRotationEquivariance) {
  Multiplier m(ModelParams::make(2, 0.5, -2.0));
  Vec z = vec({0.8, -0.3}), v0 = vec({1.5, 0.4});
  for (double a : {0.3, 1.7, -2.2}) {
    Mat R(2, 2);
    R << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    EXPECT_NEAR(m.symbol(R * z, R * v0), m.symbol(z, v0), 1e-9 * m.symbol(z, v0));
  }
  EXPECT_NEAR(m.symbol(-z, v0), m.symbol(z, v0), 1e-12);
}

TEST(Multiplier, SymbolLandauIsQuadratic) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  Vec z = vec({0.3, 0.9}), v0 = vec({-1.0, 0.2});
  EXPECT_NEAR(m.symbol(z, v0), z.dot(m.landau_matrix(v0) * z), 1e-14);
}

TEST(Multiplier, SymbolHomogeneityRegimes) {
  // E ~ |z|^2 near 0 and E ~ |z|^{2s} at infinity
  Multiplier m(ModelParams::make(2, 0.5, -2.0));
  Vec e = vec({0.6, 0.8}), v0 = vec({0.0, 1.0});
  EXPECT_NEAR(m.symbol(2e-4 * e, v0) / m.symbol(1e-4 * e, v0), 4.0, 1e-3);
  EXPECT_NEAR(m.symbol(2e3 * e, v0) / m.symbol(1e3 * e, v0), 2.0, 2e-2);
  for (double r : {0.01, 0.3, 3.0, 30.0}) EXPECT_GT(m.symbol(r * e, v0), 0.0);
  EXPECT_EQ(m.symbol(Vec::Zero(2), v0), 0.0);
}

TEST(Multiplier, IntegratedSymbolAtZeroShear) {
  // xi = 0 makes the integrand constant in tau
  Multiplier m(ModelParams::make(2, 0.5, -2.0));
  Vec eta = vec({0.5, -0.2}), v0 = vec({0.3, 0.3});
  double t = 0.7;
  EXPECT_NEAR(m.integrated_symbol(t, Vec::Zero(2), eta, v0), t * m.symbol(-eta, v0), 1e-8);
}

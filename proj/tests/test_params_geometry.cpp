#include <gtest/gtest.h>

#include <cmath>

#include "kk/field.hpp"
#include "kk/geometry.hpp"
#include "kk/params.hpp"

using namespace kk;

TEST(ModelParams, KappaIsDerived) {
  auto p = ModelParams::make(3, 0.5, -2.0);
  EXPECT_DOUBLE_EQ(p.kappa(), 1.0);
  p.gamma = -2.5;
  EXPECT_DOUBLE_EQ(p.kappa(), 1.5);
}

TEST(ModelParams, RejectsOutOfRange) {
  EXPECT_THROW(ModelParams::make(4, 0.5, -2.0), ValidationError);
  EXPECT_THROW(ModelParams::make(2, 1.5, -2.0), ValidationError);
  EXPECT_THROW(ModelParams::make(2, 0.5, -0.5), ValidationError);  // kappa < 0
  EXPECT_THROW(ModelParams::make(2, 0.5, -3.0), ValidationError);  // kappa = d
  EXPECT_NO_THROW(ModelParams::make(2, 0.5, -1.0));                // kappa = 0
}

TEST(ModelParams, HashSeparatesParameters) {
  QuadratureSpec q;
  EXPECT_NE(params_hash(ModelParams::make(2, 0.5, -2.0), q), params_hash(ModelParams::make(2, 0.5, -2.1), q));
  EXPECT_EQ(params_hash(ModelParams::make(2, 0.5, -2.0), q), params_hash(ModelParams::make(2, 0.5, -2.0), q));
}

TEST(Geometry, ShearMetricBelowEuclidean) {
  Vec v0 = vec({1.0, 2.0, -0.5});
  for (int i = 0; i < 20; ++i) {
    Vec z = vec({std::sin(1.3 * i), std::cos(0.7 * i), 0.2 * i - 1.0});
    EXPECT_LE(shear_metric(z, v0), z.norm() + 1e-14);
  }
  Vec perp = vec({2.0, -1.0, 0.0});
  EXPECT_NEAR(shear_metric(perp, v0), perp.norm(), 1e-14);
  Vec z = vec({0.3, 0.1, 0.9});
  EXPECT_NEAR(shear_metric(z, Vec::Zero(3)), z.norm(), 1e-15);
  // along v0 the metric shrinks by <v0>
  EXPECT_NEAR(shear_metric(v0, v0), v0.norm() / japanese(v0), 1e-14);
}

TEST(Geometry, BracketMetric) {
  Vec x = vec({1.0, -2.0}), v = vec({0.5, 0.5});
  EXPECT_DOUBLE_EQ(bracket_metric(x, v), std::sqrt(5.0) + 0.5);
  EXPECT_DOUBLE_EQ(japanese(vec({3.0, 4.0})), std::sqrt(26.0));
}

TEST(Geometry, FrameIsRotationOntoV0) {
  for (Vec v0 : {vec({0.6, -0.8}), vec({0.0, 3.0}), vec({-2.0, 0.0}), vec({1.0, 2.0, 2.0}), vec({0.0, 0.0, -1.0})}) {
    AnisotropicFrame f = make_frame(v0);
    const int d = static_cast<int>(v0.size());
    EXPECT_LT((f.Q.transpose() * f.Q - Mat::Identity(d, d)).norm(), 1e-14);
    EXPECT_NEAR(f.Q.determinant(), 1.0, 1e-14);
    EXPECT_LT((f.Q * unit(d, d - 1) - v0 / v0.norm()).norm(), 1e-14);
    Vec y = f.to_frame(v0);
    EXPECT_NEAR(y(d - 1), v0.norm(), 1e-14);
    // the stretching matrix scales the transverse part by <v0>
    Vec t = f.Q * unit(d, 0);
    EXPECT_LT((f.O * t - japanese(v0) * t).norm(), 1e-13);
    EXPECT_LT((f.O * f.vhat0 - f.vhat0).norm(), 1e-14);
  }
}

TEST(Geometry, TimeScales) {
  auto p = ModelParams::make(2, 0.5, -2.0);
  TimeScales ts = time_scales(p, 0.3, 2.0);
  EXPECT_DOUBLE_EQ(ts.tilde_t, 0.3 * std::pow(5.0, -1.0));
  EXPECT_DOUBLE_EQ(ts.hat_t, 0.3 * std::pow(5.0, -0.5));
}

TEST(Geometry, ScalingAmplitude) {
  auto p = ModelParams::make(2, 0.5, -2.5);
  EXPECT_DOUBLE_EQ(scaling_amplitude(p, 2.0, 1.0), std::pow(2.0, 0.5 - 1.0));
}

TEST(PhaseGrid, Coordinates) {
  PhaseGrid g;
  g.d = 2;
  g.nx = 4;
  g.nv = 8;
  g.V = 4.0;
  EXPECT_EQ(g.size(), 16u * 64u);
  EXPECT_DOUBLE_EQ(g.v_at(0)(0), -4.0);
  EXPECT_DOUBLE_EQ(g.v_at(g.nvs() - 1)(1), 3.0);
  EXPECT_DOUBLE_EQ(g.x_at(0)(0), -std::numbers::pi);
}

TEST(KineticField, MomentsOfGaussian) {
  PhaseGrid g;
  g.d = 2;
  g.nx = 2;
  g.nv = 48;
  g.V = 8.0;
  Vec c = vec({0.4, -0.3});
  auto f = KineticField::sample(g, [&](const Vec&, const Vec& v) {
    return std::exp(-0.5 * (v - c).squaredNorm()) / (2.0 * std::numbers::pi);
  });
  Moments m = f.moments();
  EXPECT_NEAR(m.m[0], 1.0, 1e-12);
  EXPECT_NEAR(m.m[1], 0.4, 1e-12);
  EXPECT_NEAR(m.m[2], -0.3, 1e-12);
  EXPECT_NEAR(m.m[3], 2.0 + c.squaredNorm(), 1e-11);
}

TEST(KineticField, ScalingTransformAmplitude) {
  auto p = ModelParams::make(2, 0.5, -2.0);
  PhaseGrid g;
  g.d = 2;
  g.nx = 8;
  g.nv = 16;
  g.V = 4.0;
  auto f = KineticField::sample(g, [](const Vec&, const Vec& v) { return std::exp(-v.squaredNorm()); });
  EXPECT_THROW(scaling_transform(f, p, 0.0, 1.0), ValidationError);
  KineticField same = scaling_transform(f, p, 1.0, 1.0);
  EXPECT_EQ(same.data, f.data);
}

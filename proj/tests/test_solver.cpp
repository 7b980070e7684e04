#include <gtest/gtest.h>

#include <cmath>

#include "kk/solver.hpp"

using namespace kk;

namespace {

PhaseGrid grid() {
  PhaseGrid g;
  g.d = 2;
  g.nx = 4;
  g.nv = 32;
  g.V = 6.0;
  return g;
}

SolverConfig config() {
  SolverConfig c;
  c.T = 0.05;
  c.time_steps = 4;
  c.max_iter = 10;
  return c;
}

}  // namespace

TEST(Solver, ZeroDataStaysZero) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  KineticField f0(grid());
  SolutionTrace tr = picard_solve(f0, m, config());
  EXPECT_EQ(tr.status, SolveStatus::Converged);
  EXPECT_EQ(tr.final_field().max_abs(), 0.0);
}

TEST(Solver, WithoutCollisionsIsTheSemigroup) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  PhaseGrid g = grid();
  SolverConfig c = config();
  c.collisions = false;
  c.v0 = vec({0.5, 0.0});
  KineticField f0 = gaussian_bump_data(g, 1e-2);
  LinearSemigroup S(m, g, c.v0);
  KineticField exact = S.apply(f0, c.T);
  SolutionTrace p = picard_solve(f0, m, c);
  EXPECT_LT((p.final_field() - exact).max_abs(), 1e-12);
  c.imex_dt = c.T / 10;
  SolutionTrace q = imex_reference(f0, m, c);
  EXPECT_LT((q.final_field() - exact).max_abs(), 1e-3 * exact.max_abs());
}

TEST(Solver, BumpAmplitude) {
  PhaseGrid g = grid();
  KineticField f = gaussian_bump_data(g, 2.5e-3);
  EXPECT_NEAR(f.max_abs(), 2.5e-3, 1e-15);
}

TEST(Solver, ConfigValidation) {
  PhaseGrid g = grid();
  SolverConfig c = config();
  c.T = 0.0;
  EXPECT_THROW(c.validate(g), ValidationError);
  c = config();
  c.T = 100.0;
  EXPECT_THROW(c.validate(g), ValidationError);
  c = config();
  c.strategy = V0Strategy::FrozenAtPoint;
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  EXPECT_THROW(picard_solve(KineticField(g), m, c), ValidationError);
  Multiplier frac(ModelParams::make(2, 0.5, -2.0));
  EXPECT_THROW(picard_solve(KineticField(g), frac, config()), ValidationError);
}

TEST(Solver, NegativeDensityRejected) {
  Multiplier m(ModelParams::make(2, 1.0, -3.0));
  PhaseGrid g = grid();
  KineticField f0 = gaussian_bump_data(g, 5.0);
  f0 *= -1.0;
  EXPECT_THROW(picard_solve(f0, m, config()), ValidationError);
}

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "kk/io.hpp"

using namespace kk;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("kk_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Config, ParsesSectionsAndComments) {
  Config c = Config::parse("# header\n[model]\nd = 3\ns = 0.25 # inline\n\n[solver]\nv0 = 1, 2, 3\nnonlinear = false\n");
  EXPECT_EQ(c.integer("model", "d", 0), 3);
  EXPECT_DOUBLE_EQ(c.num("model", "s", 0.0), 0.25);
  EXPECT_EQ(c.list("solver", "v0", {}), (std::vector<double>{1, 2, 3}));
  EXPECT_FALSE(c.flag("solver", "nonlinear", true));
  EXPECT_DOUBLE_EQ(c.num("model", "gamma", -7.0), -7.0);
}

TEST(Config, Malformed) {
  EXPECT_THROW(Config::parse("[model\nd = 2\n"), ValidationError);
  EXPECT_THROW(Config::parse("[model]\nd 2\n"), ValidationError);
  EXPECT_THROW(Config::parse("d = 2\n"), ValidationError);
  EXPECT_THROW(Config::parse("[model]\nd = 2\nd = 3\n"), ValidationError);
  EXPECT_THROW(Config::load("/nonexistent/kk.ini"), ValidationError);
}

TEST(RunConfig, KappaIsDerived) {
  EXPECT_THROW(RunConfig::from(Config::parse("[model]\ns = 0.5\ngamma = -2\nkappa = 1\n")), ValidationError);
  RunConfig r = RunConfig::from(Config::parse("[model]\ns = 0.5\ngamma = -2.5\n"));
  EXPECT_NEAR(r.model.kappa(), 1.5, 1e-15);
}

TEST(RunConfig, UnknownKeyAndRanges) {
  EXPECT_THROW(RunConfig::from(Config::parse("[model]\nspeed = 1\n")), ValidationError);
  EXPECT_THROW(RunConfig::from(Config::parse("[model]\ns = 1.5\n")), ValidationError);
  EXPECT_THROW(RunConfig::from(Config::parse("[kernel]\nv0 = 1, 2, 3\n")), ValidationError);
  EXPECT_THROW(RunConfig::from(Config::parse("[limits]\ns = 0.5, 1.0\n")), ValidationError);
}

TEST(Table, RoundTrip) {
  fs::path d = scratch("table");
  Table t;
  t.header = {"a", "b"};
  t.add({1.0 / 3.0, -2e-300});
  t.add({5.0, 6.0});
  t.note("gamma", -2.5);
  t.write(d / "t.csv");
  Table u = Table::read(d / "t.csv");
  EXPECT_EQ(u.header, t.header);
  EXPECT_EQ(u.value(0, "a"), 1.0 / 3.0);
  EXPECT_EQ(u.value(0, "b"), -2e-300);
  EXPECT_EQ(u.value(1, "b"), 6.0);
  EXPECT_EQ(std::stod(*u.find_meta("gamma")), -2.5);
  EXPECT_FALSE(u.find_meta("missing").has_value());
}

TEST(Field, RoundTrip) {
  fs::path d = scratch("field");
  PhaseGrid g;
  g.d = 2;
  g.nx = 2;
  g.nv = 4;
  g.V = 3.0;
  KineticField f = KineticField::sample(g, [](const Vec& x, const Vec& v) { return std::sin(x(0) + 0.3) * v(1) + 0.1 * x(1); });
  write_field(d / "f.csv", f);
  KineticField h = read_field(d / "f.csv");
  EXPECT_TRUE(h.grid == g);
  EXPECT_EQ(h.data, f.data);
}

TEST(Cache, EnvironmentDirectory) {
  fs::path d = scratch("cache");
  setenv("KK_CACHE_DIR", d.c_str(), 1);
  Cache c;
  unsetenv("KK_CACHE_DIR");
  EXPECT_EQ(c.dir(), d);
  ModelParams p = ModelParams::make(2, 0.5, -2.0);
  QuadratureSpec q;
  EXPECT_FALSE(c.has("profile", p, q));
  EXPECT_THROW(c.load("profile", p, q), ValidationError);
  Table t;
  t.header = {"x"};
  t.add({2.0});
  c.store("profile", p, q, t);
  EXPECT_TRUE(c.has("profile", p, q));
  EXPECT_EQ(c.load("profile", p, q).value(0, "x"), 2.0);
  ModelParams p2 = ModelParams::make(2, 0.5, -2.1);
  EXPECT_NE(c.path("profile", p, q), c.path("profile", p2, q));
}

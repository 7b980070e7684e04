// kk: batch front end for the kinetic toolkit.
// Exit status: 0 success, 1 validation failure, 2 numerical-diagnostic failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "kk/acceptance.hpp"
#include "kk/collision.hpp"
#include "kk/io.hpp"
#include "kk/kernels.hpp"
#include "kk/landau_grid.hpp"
#include "kk/norms.hpp"
#include "kk/solver.hpp"

namespace fs = std::filesystem;
using namespace kk;

namespace {

struct DiagnosticFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::string out = "kk_out";
  std::string cache;
  int threads = 1;
  bool quick = false;
  bool no_compute = false;
  std::string field;
  std::vector<int> only;
};

std::string config_text(const Globals& g) {
  if (g.config.empty()) return "";
  std::ifstream f(g.config);
  if (!f) throw ValidationError("cannot open config file: " + g.config);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunConfig load(const Globals& g) {
  if (g.threads < 1) throw ValidationError("--threads must be at least 1");
  return RunConfig::from(Config::parse(config_text(g), g.config.empty() ? "<defaults>" : g.config));
}

void emit(const Table& t, const fs::path& p) {
  t.write(p);
  std::printf("wrote %s\n", p.string().c_str());
}

// ---------------------------------------------------------------- multiplier eval

Table profile_table(const Multiplier& m) {
  Table t;
  t.header = {"a", m.params().d == 3 ? "frak_c" : "profile", "ratio_to_power"};
  for (int i = 0; i <= 40; ++i) {
    double a = i == 0 ? 0.0 : 50.0 * std::pow(10.0, -3.0 * (40 - i) / 40.0);
    double c = m.profile_direct(a);
    t.add({a, c, c / std::pow(1.0 + a, 1.0 - m.kappa())});
  }
  t.note("c_prime", m.c_prime());
  if (m.params().d == 3) t.note("frak_c0_closed", m.frak_c0_closed());
  return t;
}

Table landau_table(const Multiplier& m) {
  Table t;
  t.header = {"r", "c1", "c2"};
  for (int i = 0; i <= 32; ++i) {
    double r = 16.0 * i / 32.0;
    auto [c1, c2] = m.landau_eigen(r);
    t.add({r, c1, c2});
  }
  return t;
}

Table symbol_table_csv(const Multiplier& m, const Vec& v0) {
  const ModelParams& p = m.params();
  Table t;
  t.header = {"z_norm", "angle", "symbol", "envelope_ratio"};
  const int d = p.d;
  AnisotropicFrame fr = make_frame(v0);
  for (int i = 0; i < 21; ++i) {
    double zn = 1e-2 * std::pow(1e3, i / 20.0);
    for (int j = 0; j < 9; ++j) {
      double ph = 0.5 * std::numbers::pi * j / 8.0;
      Vec zf = Vec::Zero(d);
      zf(0) = zn * std::cos(ph);
      zf(d - 1) = zn * std::sin(ph);
      Vec z = fr.from_frame(zf);
      double e = m.symbol(z, v0);
      double sm = shear_metric(z, v0);
      double env = std::pow(japanese(v0), -p.kappa()) * std::pow(sm, 2.0 * p.s) *
                   std::pow(std::min(1.0, sm), 2.0 - 2.0 * p.s);
      t.add({zn, ph, e, e / env});
    }
  }
  return t;
}

int multiplier_eval(const Globals& g) {
  RunConfig rc = load(g);
  Multiplier m(rc.model, rc.quad);
  Cache cache(g.cache);
  std::string sym = "symbol_v0";
  for (int k = 0; k < rc.v0.size(); ++k) sym += "_" + full(rc.v0(k));
  std::vector<std::pair<std::string, std::function<Table()>>> jobs{
      {"profile", [&] { return profile_table(m); }},
      {sym, [&] { return symbol_table_csv(m, rc.v0); }},
  };
  if (rc.model.landau()) jobs.push_back({"landau_eigen", [&] { return landau_table(m); }});
  for (auto& [name, make] : jobs) {
    Table t;
    if (cache.has(name, rc.model, rc.quad)) {
      t = cache.load(name, rc.model, rc.quad);
    } else {
      if (g.no_compute) throw ValidationError("missing cache table " + cache.path(name, rc.model, rc.quad).string() +
                                              " (--no-compute)");
      t = make();
      note_params(t, rc.model);
      cache.store(name, rc.model, rc.quad, t);
      t = cache.load(name, rc.model, rc.quad);
    }
    emit(t, fs::path(g.out) / (name + ".csv"));
  }
  return 0;
}

// ---------------------------------------------------------------- kernel eval / check-bounds

int kernel_eval(const Globals& g) {
  RunConfig rc = load(g);
  if (!(rc.t > 0.0)) throw ValidationError("kernel eval requires t > 0 (got " + full(rc.t) + ")");
  Multiplier m(rc.model, rc.quad);
  const int d = rc.model.d;
  Table t;
  t.header.push_back("t");
  for (int k = 0; k < d; ++k) t.header.push_back("x" + std::to_string(k + 1));
  for (int k = 0; k < d; ++k) t.header.push_back("v" + std::to_string(k + 1));
  t.header.push_back("value");
  t.header.push_back("err");
  t.header.push_back("covered");
  std::function<double(const Vec&, const Vec&)> H;
  std::function<bool(const Vec&, const Vec&)> covered = [](const Vec&, const Vec&) { return true; };
  double err = 0.0;
  std::optional<LandauKernel> L;
  KernelEval K;
  if (rc.model.landau()) {
    L.emplace(m, rc.t, rc.v0);
    H = [&](const Vec& x, const Vec& v) { return (*L)(x, v); };
    t.note("method", "closed form");
  } else {
    FourierKernelSpec sp;
    if (g.quick) sp.n = 32;
    K = fourier_kernel(m, rc.t, rc.v0, sp);
    err = K.tolerance();
    H = [&](const Vec& x, const Vec& v) { return K.at(x, v); };
    covered = [&](const Vec& x, const Vec& v) { return K.covers(x, v); };
    t.note("method", "fourier inversion");
    t.note("mass", K.mass);
    t.note("neg_mass", K.neg_mass);
  }
  const int n = rc.points;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec x = Vec::Zero(d), v = Vec::Zero(d);
      x(0) = n == 1 ? 0.0 : -rc.half_width + 2.0 * rc.half_width * i / (n - 1);
      v(0) = n == 1 ? 0.0 : -rc.half_width + 2.0 * rc.half_width * j / (n - 1);
      std::vector<double> r{rc.t};
      for (int k = 0; k < d; ++k) r.push_back(x(k));
      for (int k = 0; k < d; ++k) r.push_back(v(k));
      r.push_back(H(x, v));
      r.push_back(err);
      r.push_back(covered(x, v) ? 1.0 : 0.0);
      t.add(r);
    }
  t.note("slice", "x = a e1, v = b e1");
  t.note("covered", "0 marks points outside the sampled box, where the value is not computed");
  note_params(t, rc.model);
  emit(t, fs::path(g.out) / "kernel.csv");
  return 0;
}

int kernel_check_bounds(const Globals& g) {
  RunConfig rc = load(g);
  if (!(rc.t > 0.0)) throw ValidationError("kernel check-bounds requires t > 0");
  Table t;
  t.header = {"kind", "m", "n", "t", "r", "value", "refined", "stable"};
  bool finite = true;
  if (rc.model.landau()) {
    Multiplier m(rc.model, rc.quad);
    double r = rc.v0.norm();
    SandwichReport sw = gaussian_sandwich(m, {rc.t}, {r}, g.quick ? 2000 : 4000, g.quick ? 2000 : 4000);
    t.add_text({"sandwich_lower", "0", "0", full(rc.t), full(r), full(sw.lower), full(sw.lower),
                sw.max_rel_change < 0.1 ? "1" : "0"});
    t.add_text({"sandwich_upper", "0", "0", full(rc.t), full(r), full(sw.upper), full(sw.upper),
                sw.max_rel_change < 0.1 ? "1" : "0"});
    t.note("c1", sw.c1);
    t.note("c2", sw.c2);
    finite = finite && std::isfinite(sw.lower) && std::isfinite(sw.upper) && sw.lower > 0.0;
    for (const BoundEntry& e : landau_bound_report(m, {rc.t}, {r}, g.quick ? 1000 : 3000)) {
      t.add_text({"derivative", std::to_string(e.m), std::to_string(e.n), full(e.t), full(e.r), full(e.sup_ratio),
                  full(e.refined_sup_ratio), e.stable() ? "1" : "0"});
      finite = finite && std::isfinite(e.sup_ratio);
    }
  } else {
    if (rc.model.d != 2) throw ValidationError("the Kolmogorov bound sweep is implemented for d = 2");
    KolmogorovSpec sp;
    sp.lambda_cut = 10.0;
    KolmogorovKernel K(2, rc.model.s, sp);
    KolmogorovBound a = kolmogorov_bound_sweep(K, g.quick ? 11 : 21, 4.0);
    KolmogorovBound b = kolmogorov_bound_sweep(K, g.quick ? 21 : 41, 4.0);
    bool st = std::abs(a.sup - b.sup) <= 0.1 * std::max(a.sup, b.sup);
    t.add_text({"kolmogorov", "0", "0", "1", "0", full(a.sup), full(b.sup), st ? "1" : "0"});
    t.note("min_weighted", b.min_weighted);
    finite = std::isfinite(a.sup) && std::isfinite(b.sup);
  }
  note_params(t, rc.model);
  emit(t, fs::path(g.out) / "bounds.csv");
  if (!finite) throw DiagnosticFailure("bound sweep produced a non-finite or vanishing constant");
  return 0;
}

// ---------------------------------------------------------------- collision apply

KineticField input_field(const Globals& g, const RunConfig& rc) {
  if (!g.field.empty()) {
    KineticField f = read_field(g.field);
    if (f.grid.d != rc.model.d) throw ValidationError("field dimension does not match model.d");
    return f;
  }
  return gaussian_bump_data(rc.grid, rc.amplitude);
}

int collision_apply(const Globals& g) {
  RunConfig rc = load(g);
  if (g.field.empty()) throw ValidationError("collision apply requires --field");
  KineticField f = read_field(g.field);
  const PhaseGrid& G = f.grid;
  if (G.d != rc.model.d) throw ValidationError("field dimension does not match model.d");
  Multiplier m(rc.model, rc.quad);
  const int d = G.d;
  KineticField main(G), rem(G);
  if (rc.model.landau()) {
    LandauGrid L(m, G);
    for (std::size_t ix = 0; ix < G.nxs(); ++ix) {
      std::vector<double> s(f.data.begin() + ix * G.nvs(), f.data.begin() + (ix + 1) * G.nvs());
      auto q = L.q(s, s);
      for (std::size_t iv = 0; iv < G.nvs(); ++iv) {
        main.at(ix, iv) = q.main[iv];
        rem.at(ix, iv) = q.rem[iv];
      }
    }
  } else {
    CarlemanOperator op(m, rc.collision);
    for (std::size_t ix = 0; ix < G.nxs(); ++ix) {
      VFunction fv = slice_function(f, ix);
      for (std::size_t iv = 0; iv < G.nvs(); ++iv) {
        CollisionPoint P = op.point(fv, fv, G.v_at(iv));
        main.at(ix, iv) = P.main;
        rem.at(ix, iv) = P.rem();
      }
    }
  }
  Table t;
  for (int k = 0; k < d; ++k) t.header.push_back("x" + std::to_string(k + 1));
  for (int k = 0; k < d; ++k) t.header.push_back("v" + std::to_string(k + 1));
  for (const char* c : {"main", "rem", "total"}) t.header.push_back(c);
  double edge = 0.0;
  for (std::size_t ix = 0; ix < G.nxs(); ++ix)
    for (std::size_t iv = 0; iv < G.nvs(); ++iv) {
      Vec x = G.x_at(ix), v = G.v_at(iv);
      std::vector<double> r;
      for (int k = 0; k < d; ++k) r.push_back(x(k));
      for (int k = 0; k < d; ++k) r.push_back(v(k));
      r.push_back(main.at(ix, iv));
      r.push_back(rem.at(ix, iv));
      r.push_back(main.at(ix, iv) + rem.at(ix, iv));
      t.add(r);
      if (v.cwiseAbs().maxCoeff() >= G.V - 1.5 * G.dv()) edge = std::max(edge, std::abs(f.at(ix, iv)));
    }
  Moments mo = (main + rem).moments();
  std::string ms;
  for (double x : mo.m) ms += (ms.empty() ? "" : " ") + full(x);
  t.note("moments", ms);
  t.note("box_edge_max_abs_f", edge);
  note_params(t, rc.model);
  emit(t, fs::path(g.out) / "collision.csv");
  return 0;
}

// ---------------------------------------------------------------- limits grazing

int limits_grazing(const Globals& g) {
  RunConfig rc = load(g);
  const int d = rc.model.d;
  Vec c1 = Vec::Zero(d), c2 = Vec::Zero(d);
  c1(0) = 0.2;
  c1(1) = -0.1;
  c2(0) = -0.3;
  c2(1) = 0.2;
  VFunction f1 = gaussian_fn(c1, 0.9, 1.0), f2 = gaussian_fn(c2, 0.7, 0.8);
  int n = g.quick ? 3 : 4;
  std::vector<Vec> vs;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vec v = Vec::Zero(d);
      v(0) = -1.2 + 2.4 * i / (n - 1);
      v(1) = -1.2 + 2.4 * j / (n - 1);
      vs.push_back(v);
    }
  CollisionSpec sp = rc.collision;
  sp.trunc = std::min(sp.trunc, 7.0);
  GrazingReport rep = grazing_limit_check(d, rc.model.gamma, f1, f2, rc.s_list, vs, sp);
  Table t;
  t.header = {"s", "c_fit", "residual", "residual_q1"};
  for (auto& r : rep.rows) t.add({r.s, r.c_fit, r.residual, r.residual_q1});
  t.note("gamma", rep.gamma);
  t.note("c_spread", rep.c_spread());
  t.note("strictly_decreasing", rep.strictly_decreasing() ? "true" : "false");
  emit(t, fs::path(g.out) / "grazing.csv");
  if (!rep.strictly_decreasing()) throw DiagnosticFailure("grazing residuals are not strictly decreasing");
  return 0;
}

// ---------------------------------------------------------------- norm cr

int norm_cr(const Globals& g) {
  RunConfig rc = load(g);
  if (g.field.empty()) throw ValidationError("norm cr requires --field");
  KineticField f = read_field(g.field);
  NormReport r = critical_norm(f, rc.model, rc.weights, rc.norm);
  const int d = rc.model.d;
  Table t;
  t.header.push_back("value");
  for (const char* p : {"x", "v", "v0"})
    for (int k = 0; k < d; ++k) t.header.push_back(p + std::to_string(k + 1));
  for (const char* c : {"inner_error", "boundary", "v0_boundary"}) t.header.push_back(c);
  std::vector<double> row{r.value};
  for (const Vec* p : {&r.x, &r.v, &r.v0})
    for (int k = 0; k < d; ++k) row.push_back(p->size() == d ? (*p)(k) : 0.0);
  row.push_back(r.inner_error);
  row.push_back(r.boundary);
  row.push_back(r.v0_boundary);
  t.add(row);
  t.note("varkappa1", rc.weights.varkappa1);
  t.note("varkappa2", rc.weights.varkappa2);
  note_params(t, rc.model);
  emit(t, fs::path(g.out) / "norm.csv");
  if (!std::isfinite(r.value)) throw DiagnosticFailure("critical norm is not finite");
  return 0;
}

// ---------------------------------------------------------------- solve

int solve(const Globals& g, bool use_picard) {
  RunConfig rc = load(g);
  std::string text = config_text(g);
  Multiplier m(rc.model, rc.quad);
  KineticField f0 = input_field(g, rc);
  SolutionTrace tr = use_picard ? picard_solve(f0, m, rc.solver) : imex_reference(f0, m, rc.solver);
  fs::path dir = fs::path(g.out) / (use_picard ? "picard" : "imex");
  fs::create_directories(dir / "trace");
  for (std::size_t i = 0; i < tr.fields.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "step_%04zu.csv", i);
    Table ft = field_table(tr.fields[i]);
    ft.note("t", tr.times[i]);
    ft.write(dir / "trace" / name);
  }
  Table mon;
  mon.header = {"t", "min_mu_f", "drift", "y00", "y10", "y01"};
  for (const MonitorRow& r : monitors(tr, rc.model, rc.weights, true))
    mon.add({r.t, r.min_mu_f, r.drift, r.y00, r.y10, r.y01});
  emit(mon, dir / "monitors.csv");
  Table it;
  it.header = {"iteration", "residual", "ratio", "min_mu_f"};
  for (std::size_t i = 0; i < tr.residuals.size(); ++i)
    it.add({double(i + 1), tr.residuals[i], i ? tr.ratios[i - 1] : 0.0,
            i < tr.min_mu_f_history.size() ? tr.min_mu_f_history[i] : 0.0});
  emit(it, dir / "iterations.csv");
  std::uint64_t h = fnv1a(text);
  for (double x : f0.data) h = fnv1a(full(x), h);
  std::ofstream man(dir / "manifest.txt");
  man << "method: " << tr.method << "\nstatus: " << status_name(tr.status) << "\niterations: " << tr.iterations
      << "\nmessage: " << tr.message << "\nparams: " << params_key(rc.model, rc.quad) << "\nT: " << full(rc.solver.T)
      << "\ntime_steps: " << rc.solver.time_steps << "\ntol: " << full(rc.solver.tol)
      << "\nimex_dt: " << full(rc.solver.imex_dt) << "\nthreads: " << g.threads << "\ninput_hash: " << std::hex << h
      << std::dec << "\n";
  std::printf("%s: %s after %d iterations\n", tr.method.c_str(), status_name(tr.status), tr.iterations);
  if (tr.status != SolveStatus::Converged) throw DiagnosticFailure(std::string("solver ended with ") + status_name(tr.status));
  return 0;
}

// ---------------------------------------------------------------- verify all

int verify_all(const Globals& g) {
  if (!g.config.empty()) load(g);
  AcceptanceOptions opt;
  opt.quick = g.quick;
  opt.only = g.only;
  Table t;
  t.header = {"id", "name", "pass", "seconds", "detail"};
  int failed = 0;
  run_acceptance(opt, [&](const CriterionResult& r) {
    std::printf("%s\n", format_result(r).c_str());
    std::fflush(stdout);
    std::string det = r.detail;
    for (char& c : det)
      if (c == ',') c = ';';
    t.add_text({std::to_string(r.id), r.name, r.pass ? "1" : "0", full(r.seconds), det});
    failed += !r.pass;
  });
  t.note("quick", g.quick ? "true" : "false");
  emit(t, fs::path(g.out) / "verify.csv");
  if (failed) throw DiagnosticFailure(std::to_string(failed) + " acceptance criteria failed");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kk: kinetic operator toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config, "sectioned key = value configuration file");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--cache", g.cache, "cache directory (default $KK_CACHE_DIR, then ./kk_cache)");
  app.add_option("--threads", g.threads, "worker threads");
  app.add_flag("--quick", g.quick, "reduced resolution");
  app.add_flag("--no-compute", g.no_compute, "fail instead of computing missing cache tables");

  int (*selected)(const Globals&) = nullptr;
  auto leaf = [&](CLI::App* parent, const char* name, const char* help, int (*fn)(const Globals&), bool field) {
    CLI::App* s = parent->add_subcommand(name, help);
    if (field) s->add_option("--field", g.field, "field file (CSV with grid metadata)");
    s->callback([&selected, fn] { selected = fn; });
    return s;
  };
  CLI::App* mult = app.add_subcommand("multiplier", "symbol and angular coefficient tables");
  mult->require_subcommand(1);
  leaf(mult, "eval", "tabulate the profile, Landau eigenvalues and symbol", multiplier_eval, false);
  CLI::App* ker = app.add_subcommand("kernel", "linearized kernels");
  ker->require_subcommand(1);
  leaf(ker, "eval", "evaluate the kernel on a slice", kernel_eval, false);
  leaf(ker, "check-bounds", "envelope and bound sweeps", kernel_check_bounds, false);
  CLI::App* col = app.add_subcommand("collision", "collision operators");
  col->require_subcommand(1);
  leaf(col, "apply", "Q(f, f) of a field file", collision_apply, true);
  CLI::App* lim = app.add_subcommand("limits", "asymptotic regimes");
  lim->require_subcommand(1);
  leaf(lim, "grazing", "grazing limit residuals", limits_grazing, false);
  CLI::App* nrm = app.add_subcommand("norm", "critical norms");
  nrm->require_subcommand(1);
  leaf(nrm, "cr", "critical norm of a field file", norm_cr, true);
  CLI::App* sol = app.add_subcommand("solve", "nonlinear solvers");
  sol->require_subcommand(1);
  leaf(sol, "picard", "Picard iteration on the Duhamel formula",
       [](const Globals& gg) { return solve(gg, true); }, true);
  leaf(sol, "imex", "IMEX reference integrator", [](const Globals& gg) { return solve(gg, false); }, true);
  CLI::App* ver = app.add_subcommand("verify", "acceptance suite");
  ver->require_subcommand(1);
  CLI::App* all = leaf(ver, "all", "run every acceptance criterion", verify_all, false);
  all->add_option("--only", g.only, "criterion ids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  try {
    return selected(g);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const DiagnosticFailure& e) {
    std::fprintf(stderr, "diagnostic failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "collision.hpp"
#include "field.hpp"
#include "norms.hpp"
#include "params.hpp"
#include "solver.hpp"
#include "vfunction.hpp"

namespace kk {

// ---------------------------------------------------------------------------------------------
// sectioned key = value configuration

class Config {
 public:
  using Section = std::map<std::string, std::string>;

  static Config parse(const std::string& text, const std::string& origin = "<config>") {
    Config c;
    std::istringstream in(text);
    std::string line, section;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']' || line.size() < 3) throw malformed(origin, no, "bad section header");
        section = trim(line.substr(1, line.size() - 2));
        c.sections_[section];
        continue;
      }
      auto eq = line.find('=');
      if (eq == std::string::npos) throw malformed(origin, no, "expected key = value");
      if (section.empty()) throw malformed(origin, no, "key outside of a section");
      std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
      if (key.empty()) throw malformed(origin, no, "empty key");
      if (c.sections_[section].count(key)) throw malformed(origin, no, "duplicate key " + key);
      c.sections_[section][key] = val;
    }
    return c;
  }

  static Config load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
  }

  bool has(const std::string& sec, const std::string& key) const {
    auto it = sections_.find(sec);
    return it != sections_.end() && it->second.count(key);
  }
  bool has_section(const std::string& sec) const { return sections_.count(sec) > 0; }
  const std::map<std::string, Section>& sections() const { return sections_; }

  std::string str(const std::string& sec, const std::string& key, const std::string& def) const {
    return has(sec, key) ? sections_.at(sec).at(key) : def;
  }
  double num(const std::string& sec, const std::string& key, double def) const {
    if (!has(sec, key)) return def;
    const std::string& s = sections_.at(sec).at(key);
    try {
      std::size_t pos = 0;
      double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      throw ValidationError(sec + "." + key + ": not a number: " + s);
    }
  }
  int integer(const std::string& sec, const std::string& key, int def) const {
    double v = num(sec, key, def);
    if (v != std::floor(v)) throw ValidationError(sec + "." + key + ": expected an integer");
    return static_cast<int>(v);
  }
  bool flag(const std::string& sec, const std::string& key, bool def) const {
    if (!has(sec, key)) return def;
    std::string s = sections_.at(sec).at(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ValidationError(sec + "." + key + ": expected true or false");
  }
  /// comma or whitespace separated list
  std::vector<double> list(const std::string& sec, const std::string& key, std::vector<double> def) const {
    if (!has(sec, key)) return def;
    std::string s = sections_.at(sec).at(key);
    for (char& ch : s)
      if (ch == ',') ch = ' ';
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ValidationError(sec + "." + key + ": not a number list: " + sections_.at(sec).at(key));
      }
    }
    return out;
  }

  /// unknown sections or keys are configuration errors
  void check_known(const std::map<std::string, std::set<std::string>>& known) const {
    for (const auto& [sec, kv] : sections_) {
      auto it = known.find(sec);
      if (it == known.end()) throw ValidationError("unknown config section [" + sec + "]");
      for (const auto& [k, v] : kv)
        if (!it->second.count(k)) throw ValidationError("unknown config key " + sec + "." + k);
    }
  }

 private:
  static std::string trim(const std::string& s) {
    auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }
  static ValidationError malformed(const std::string& origin, int line, const std::string& what) {
    return ValidationError(origin + ":" + std::to_string(line) + ": malformed config: " + what);
  }

  std::map<std::string, Section> sections_;
};

inline Vec to_vec(const std::vector<double>& v) {
  Vec r(static_cast<int>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) r(static_cast<int>(i)) = v[i];
  return r;
}

/// Every section the CLI understands. kappa is deliberately absent.
struct RunConfig {
  ModelParams model;
  PhaseGrid grid;
  QuadratureSpec quad;
  CollisionSpec collision;
  WeightSpec weights;
  NormSpec norm;
  SolverConfig solver;
  // [kernel]
  double t = 0.5;
  Vec v0;
  int points = 11;
  double half_width = 2.0;
  // [limits]
  std::vector<double> s_list{0.9, 0.95, 0.99};
  double amplitude = 1e-3;  // weighted sup of the built-in initial datum

  static const std::map<std::string, std::set<std::string>>& known_keys() {
    static const std::map<std::string, std::set<std::string>> k{
        {"model", {"d", "s", "gamma", "delta0"}},
        {"grid", {"nx", "nv", "V", "Lx"}},
        {"quadrature", {"radial_nodes", "angular_nodes", "line_nodes", "tau_nodes", "v_trunc", "rel_tol",
                        "lambda_cut"}},
        {"collision", {"theta_nodes", "rho_nodes", "line_nodes", "trunc"}},
        {"norm", {"varkappa1", "varkappa2", "refine_levels", "v_reach"}},
        {"solver",
         {"T", "time_steps", "tau_nodes", "max_iter", "tol", "imex_dt", "v0", "nonlinear", "tol_pos", "amplitude"}},
        {"kernel", {"t", "v0", "points", "half_width"}},
        {"limits", {"s"}},
    };
    return k;
  }

  static RunConfig from(const Config& c) {
    if (c.has("model", "kappa")) throw ValidationError("model.kappa is derived from gamma and s and cannot be set");
    c.check_known(known_keys());
    RunConfig r;
    double s = c.num("model", "s", 0.5), g = c.num("model", "gamma", -2.0);
    r.model = ModelParams::make(c.integer("model", "d", 2), s, g, c.num("model", "delta0", 0.5));
    r.grid.d = r.model.d;
    r.grid.nx = c.integer("grid", "nx", 8);
    r.grid.nv = c.integer("grid", "nv", 32);
    r.grid.V = c.num("grid", "V", 6.0);
    r.grid.Lx = c.num("grid", "Lx", 2.0 * std::numbers::pi);
    if (r.grid.nx < 1 || r.grid.nv < 4 || !(r.grid.V > 0.0) || !(r.grid.Lx > 0.0))
      throw ValidationError("grid: nx >= 1, nv >= 4, V > 0 and Lx > 0 are required");
    r.quad.radial_nodes = c.integer("quadrature", "radial_nodes", r.quad.radial_nodes);
    r.quad.angular_nodes = c.integer("quadrature", "angular_nodes", r.quad.angular_nodes);
    r.quad.line_nodes = c.integer("quadrature", "line_nodes", r.quad.line_nodes);
    r.quad.tau_nodes = c.integer("quadrature", "tau_nodes", r.quad.tau_nodes);
    r.quad.v_trunc = c.num("quadrature", "v_trunc", r.quad.v_trunc);
    r.quad.rel_tol = c.num("quadrature", "rel_tol", r.quad.rel_tol);
    r.quad.lambda_cut = c.num("quadrature", "lambda_cut", r.quad.lambda_cut);
    r.collision.theta_nodes = c.integer("collision", "theta_nodes", r.collision.theta_nodes);
    r.collision.rho_nodes = c.integer("collision", "rho_nodes", r.collision.rho_nodes);
    r.collision.line_nodes = c.integer("collision", "line_nodes", r.collision.line_nodes);
    r.collision.trunc = c.num("collision", "trunc", r.collision.trunc);
    r.weights.varkappa1 = c.num("norm", "varkappa1", 0.0);
    r.weights.varkappa2 = c.num("norm", "varkappa2", 0.0);
    r.weights.validate();
    r.norm.refine_levels = c.integer("norm", "refine_levels", r.norm.refine_levels);
    r.norm.v_reach = c.num("norm", "v_reach", r.norm.v_reach);
    r.solver.T = c.num("solver", "T", r.solver.T);
    r.solver.time_steps = c.integer("solver", "time_steps", r.solver.time_steps);
    r.solver.tau_nodes = c.integer("solver", "tau_nodes", r.solver.tau_nodes);
    r.solver.max_iter = c.integer("solver", "max_iter", r.solver.max_iter);
    r.solver.tol = c.num("solver", "tol", r.solver.tol);
    r.solver.imex_dt = c.num("solver", "imex_dt", r.solver.imex_dt);
    r.solver.tol_pos = c.num("solver", "tol_pos", r.solver.tol_pos);
    r.solver.nonlinear = c.flag("solver", "nonlinear", r.solver.nonlinear);
    r.solver.weights = r.weights;
    r.amplitude = c.num("solver", "amplitude", r.amplitude);
    if (c.has("solver", "v0")) r.solver.v0 = to_vec(c.list("solver", "v0", {}));
    r.t = c.num("kernel", "t", r.t);
    r.v0 = c.has("kernel", "v0") ? to_vec(c.list("kernel", "v0", {})) : Vec(Vec::Zero(r.model.d));
    r.points = c.integer("kernel", "points", r.points);
    r.half_width = c.num("kernel", "half_width", r.half_width);
    r.s_list = c.list("limits", "s", r.s_list);
    r.validate();
    return r;
  }

  void validate() const {
    model.validate();
    if (v0.size() != model.d) throw ValidationError("kernel.v0 must have d components");
    if (solver.v0.size() != 0 && solver.v0.size() != model.d) throw ValidationError("solver.v0 must have d components");
    if (points < 1) throw ValidationError("kernel.points must be positive");
    for (double s : s_list)
      if (!(s > 0.0 && s < 1.0)) throw ValidationError("limits.s entries must lie in (0, 1)");
  }
};

// ---------------------------------------------------------------------------------------------
// CSV with a header row and a trailing "# key: value" block

inline std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> meta;

  void add(const std::vector<double>& r) {
    std::vector<std::string> s;
    for (double x : r) s.push_back(full(x));
    rows.push_back(std::move(s));
  }
  void add_text(std::vector<std::string> r) { rows.push_back(std::move(r)); }
  void note(const std::string& k, const std::string& v) { meta.emplace_back(k, v); }
  void note(const std::string& k, double v) { meta.emplace_back(k, full(v)); }

  std::optional<std::string> find_meta(const std::string& k) const {
    for (const auto& [a, b] : meta)
      if (a == k) return b;
    return std::nullopt;
  }
  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ValidationError("csv: no column " + name);
  }
  double value(std::size_t row, const std::string& col) const { return std::stod(rows.at(row).at(column(col))); }

  void write(std::ostream& os) const {
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    for (const auto& [k, v] : meta) os << "# " << k << ": " << v << '\n';
  }
  void write(const std::filesystem::path& p) const {
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::ofstream f(p);
    if (!f) throw ValidationError("cannot write " + p.string());
    write(f);
  }

  static Table read(const std::filesystem::path& p) {
    std::ifstream f(p);
    if (!f) throw ValidationError("cannot open " + p.string());
    Table t;
    std::string line;
    bool have_header = false;
    while (std::getline(f, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      if (line[0] == '#') {
        auto c = line.find(':');
        if (c == std::string::npos) continue;
        std::string k = line.substr(1, c - 1), v = line.substr(c + 1);
        auto strip = [](std::string s) {
          auto a = s.find_first_not_of(' ');
          auto b = s.find_last_not_of(' ');
          return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        t.meta.emplace_back(strip(k), strip(v));
        continue;
      }
      std::vector<std::string> cells;
      std::stringstream ss(line);
      std::string cell;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      if (!have_header) {
        t.header = cells;
        have_header = true;
      } else {
        if (cells.size() != t.header.size()) throw ValidationError("csv: ragged row in " + p.string());
        t.rows.push_back(cells);
      }
    }
    if (!have_header) throw ValidationError("csv: missing header row in " + p.string());
    return t;
  }
};

inline void note_params(Table& t, const ModelParams& p) {
  t.note("d", std::to_string(p.d));
  t.note("s", p.s);
  t.note("gamma", p.gamma);
  t.note("kappa", p.kappa());
  t.note("delta0", p.delta0);
}

// ---------------------------------------------------------------------------------------------
// field files: one row per grid point, grid description in the metadata block

inline Table field_table(const KineticField& f) {
  const PhaseGrid& g = f.grid;
  Table t;
  for (int k = 0; k < g.d; ++k) t.header.push_back("x" + std::to_string(k + 1));
  for (int k = 0; k < g.d; ++k) t.header.push_back("v" + std::to_string(k + 1));
  t.header.push_back("value");
  for (std::size_t ix = 0; ix < g.nxs(); ++ix) {
    Vec x = g.x_at(ix);
    for (std::size_t iv = 0; iv < g.nvs(); ++iv) {
      Vec v = g.v_at(iv);
      std::vector<double> r;
      for (int k = 0; k < g.d; ++k) r.push_back(x(k));
      for (int k = 0; k < g.d; ++k) r.push_back(v(k));
      r.push_back(f.at(ix, iv));
      t.add(r);
    }
  }
  t.note("grid.d", std::to_string(g.d));
  t.note("grid.nx", std::to_string(g.nx));
  t.note("grid.nv", std::to_string(g.nv));
  t.note("grid.V", g.V);
  t.note("grid.Lx", g.Lx);
  return t;
}

inline void write_field(const std::filesystem::path& p, const KineticField& f) { field_table(f).write(p); }

inline KineticField read_field(const std::filesystem::path& p) {
  Table t = Table::read(p);
  auto req = [&](const std::string& k) {
    auto v = t.find_meta(k);
    if (!v) throw ValidationError("field file " + p.string() + " lacks metadata " + k);
    return *v;
  };
  PhaseGrid g;
  g.d = std::stoi(req("grid.d"));
  g.nx = std::stoi(req("grid.nx"));
  g.nv = std::stoi(req("grid.nv"));
  g.V = std::stod(req("grid.V"));
  g.Lx = std::stod(req("grid.Lx"));
  if (t.rows.size() != g.size()) throw ValidationError("field file " + p.string() + " has the wrong number of rows");
  KineticField f(g);
  int col = t.column("value");
  for (std::size_t i = 0; i < t.rows.size(); ++i) f.data[i] = std::stod(t.rows[i][col]);
  return f;
}

// ---------------------------------------------------------------------------------------------
// grid slice as a velocity function: cubic interpolation, centred differences for the derivatives

inline VFunction slice_function(const KineticField& f, std::size_t ix) {
  auto F = std::make_shared<KineticField>(f);
  const double h = 0.5 * f.grid.dv();
  const int d = f.grid.d;
  VFunction g;
  g.value = [F, ix](const Vec& v) { return interp_v(*F, ix, v); };
  g.grad = [F, ix, h, d](const Vec& v) {
    Vec r(d);
    for (int k = 0; k < d; ++k) {
      Vec e = Vec::Zero(d);
      e(k) = h;
      r(k) = (interp_v(*F, ix, v + e) - interp_v(*F, ix, v - e)) / (2.0 * h);
    }
    return r;
  };
  g.hess = [F, ix, h, d](const Vec& v) {
    Mat H(d, d);
    double c = interp_v(*F, ix, v);
    for (int a = 0; a < d; ++a)
      for (int b = a; b < d; ++b) {
        Vec ea = Vec::Zero(d), eb = Vec::Zero(d);
        ea(a) = h;
        eb(b) = h;
        if (a == b) {
          H(a, a) = (interp_v(*F, ix, v + ea) - 2.0 * c + interp_v(*F, ix, v - ea)) / (h * h);
        } else {
          H(a, b) = (interp_v(*F, ix, v + ea + eb) - interp_v(*F, ix, v + ea - eb) - interp_v(*F, ix, v - ea + eb) +
                     interp_v(*F, ix, v - ea - eb)) /
                    (4.0 * h * h);
          H(b, a) = H(a, b);
        }
      }
    return H;
  };
  g.support.push_back(Ball{Vec::Zero(d), f.grid.V * std::sqrt(static_cast<double>(d))});
  return g;
}

// ---------------------------------------------------------------------------------------------
// on-disk table cache keyed by a hash of (ModelParams, QuadratureSpec)

class Cache {
 public:
  /// explicit directory, else $KK_CACHE_DIR, else ./kk_cache
  explicit Cache(std::string dir = "") {
    if (dir.empty())
      if (const char* e = std::getenv("KK_CACHE_DIR")) dir = e;
    if (dir.empty()) dir = "kk_cache";
    dir_ = dir;
  }
  const std::filesystem::path& dir() const { return dir_; }

  std::filesystem::path path(const std::string& table, const ModelParams& p, const QuadratureSpec& q) const {
    return dir_ / (table + "-" + params_hash(p, q) + ".csv");
  }
  bool has(const std::string& table, const ModelParams& p, const QuadratureSpec& q) const {
    return std::filesystem::exists(path(table, p, q));
  }
  Table load(const std::string& table, const ModelParams& p, const QuadratureSpec& q) const {
    auto f = path(table, p, q);
    if (!std::filesystem::exists(f)) throw ValidationError("cache miss: " + f.string());
    return Table::read(f);
  }
  void store(const std::string& table, const ModelParams& p, const QuadratureSpec& q, Table t) const {
    t.note("key", params_key(p, q));
    t.write(path(table, p, q));
  }

 private:
  std::filesystem::path dir_;
};

}  // namespace kk

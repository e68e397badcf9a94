#pragma once

// Flat `key = value` configuration files with `#` comments, for simulation
// scenarios, stability maps and fundamental-diagram plots.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "delayflow/errors.hpp"
#include "delayflow/macro_sim.hpp"
#include "delayflow/micro_sim.hpp"
#include "delayflow/stability.hpp"

namespace delayflow {

struct KeyValues {
  std::map<std::string, std::string> values;
  std::map<std::string, std::size_t> lines;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string join_errors(const std::string& what, const std::vector<std::string>& errs) {
  std::string msg = what;
  for (const auto& e : errs) msg += "\n  " + e;
  return msg;
}

// Shortest representation that parses back to the same double.
inline std::string exact(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in, const std::string& source = "config") {
  KeyValues kv;
  std::vector<std::string> errs;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errs.push_back(source + ":" + std::to_string(no) + ": expected key = value");
      continue;
    }
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      errs.push_back(source + ":" + std::to_string(no) + ": empty key");
      continue;
    }
    if (kv.values.count(key)) errs.push_back(source + ":" + std::to_string(no) + ": duplicate key '" + key + "'");
    kv.values[key] = value;
    kv.lines[key] = no;
  }
  if (!errs.empty()) throw ConfigError(detail::join_errors("invalid " + source, errs));
  return kv;
}

inline KeyValues parse_key_values(const std::string& text, const std::string& source = "config") {
  std::istringstream in(text);
  return parse_key_values(in, source);
}

/// Typed reader over KeyValues that collects every problem before failing.
class FieldReader {
 public:
  FieldReader(const KeyValues& kv, std::string source) : kv_(kv), source_(std::move(source)) {}

  void number(const std::string& key, double& out) {
    seen_.push_back(key);
    const auto it = kv_.values.find(key);
    if (it == kv_.values.end()) return;
    const auto& s = it->second;
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return fail(key, "'" + s + "' is not a number");
    out = v;
  }

  template <class I>
  void integer(const std::string& key, I& out) {
    seen_.push_back(key);
    const auto it = kv_.values.find(key);
    if (it == kv_.values.end()) return;
    const auto& s = it->second;
    I v{};
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return fail(key, "'" + s + "' is not a non-negative integer");
    out = v;
  }

  template <class E>
  void choice(const std::string& key, E& out, const std::map<std::string, E>& options) {
    seen_.push_back(key);
    const auto it = kv_.values.find(key);
    if (it == kv_.values.end()) return;
    const auto o = options.find(it->second);
    if (o == options.end()) {
      std::string allowed;
      for (const auto& [name, _] : options) allowed += (allowed.empty() ? "" : "|") + name;
      return fail(key, "'" + it->second + "' is not one of " + allowed);
    }
    out = o->second;
  }

  void text(const std::string& key, std::string& out) {
    seen_.push_back(key);
    const auto it = kv_.values.find(key);
    if (it != kv_.values.end()) out = it->second;
  }

  void check(bool ok, const std::string& msg) {
    if (!ok) errors_.push_back(source_ + ": " + msg);
  }

  // Throws ConfigError listing every problem, including unknown keys.
  void finish() {
    for (const auto& [key, _] : kv_.values)
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        errors_.push_back(source_ + ":" + std::to_string(kv_.lines.at(key)) + ": unknown key '" + key + "'");
    if (!errors_.empty()) throw ConfigError(detail::join_errors("invalid " + source_, errors_));
  }

 private:
  void fail(const std::string& key, const std::string& msg) {
    errors_.push_back(source_ + ":" + std::to_string(kv_.lines.at(key)) + ": " + key + ": " + msg);
  }

  const KeyValues& kv_;
  std::string source_;
  std::vector<std::string> seen_;
  std::vector<std::string> errors_;
};

template <class E>
std::string enum_label(E value, const std::map<std::string, E>& options) {
  for (const auto& [name, v] : options)
    if (v == value) return name;
  return "?";
}

inline const std::map<std::string, InitKind>& init_names() {
  static const std::map<std::string, InitKind> m{
      {"homogeneous", InitKind::homogeneous}, {"jam", InitKind::jam}, {"random", InitKind::random}, {"perturbed", InitKind::perturbed}};
  return m;
}

inline const std::map<std::string, Scheme>& scheme_names() {
  static const std::map<std::string, Scheme> m{
      {"godunov_euler", Scheme::godunov_euler}, {"godunov_godunov", Scheme::godunov_godunov}, {"godunov_exact", Scheme::godunov_exact}};
  return m;
}

// ---------------------------------------------------------------------------
// Scenarios

enum class ModelKind { micro, macro, both };

struct ScenarioConfig {
  ModelKind model = ModelKind::both;
  Scheme scheme = Scheme::godunov_exact;
  MicroModel micro_model = MicroModel::first_order;
  double v0 = 2.0, ell = 1.0, t_gap = 1.0;
  double ring_length = 101.0;
  std::size_t n_agents = 50;
  double tau = 1.0;
  double dt = 0.01;
  double dx = 2.02;
  double t_end = 1000.0;
  InitKind init = InitKind::perturbed;
  std::uint64_t seed = 1;
  std::size_t record_stride = 100;
  double jam_gap = 0.05;
  double perturbation = 0.1;
  CollisionPolicy collision = CollisionPolicy::abort;
  BoundsPolicy bounds = BoundsPolicy::abort;
  std::string out_dir = "out";

  bool has_micro() const { return model != ModelKind::macro; }
  bool has_macro() const { return model != ModelKind::micro; }

  std::size_t n_cells() const { return static_cast<std::size_t>(std::llround(ring_length / dx)); }

  RingConfig ring() const {
    RingConfig c;
    c.ring_length = ring_length;
    c.n_agents = n_agents;
    c.tau = tau;
    c.dt = dt;
    c.ov = TriangularOV(v0, ell, t_gap);
    c.seed = seed;
    c.jam_gap = jam_gap;
    c.perturbation = perturbation;
    c.model = micro_model;
    c.collision = collision;
    c.record_stride = record_stride;
    return c;
  }
};

namespace detail {

inline const std::map<std::string, ModelKind>& model_names() {
  static const std::map<std::string, ModelKind> m{{"micro", ModelKind::micro}, {"macro", ModelKind::macro}, {"both", ModelKind::both}};
  return m;
}
inline const std::map<std::string, MicroModel>& micro_model_names() {
  static const std::map<std::string, MicroModel> m{{"first_order", MicroModel::first_order}, {"newell_delayed", MicroModel::newell_delayed}};
  return m;
}
inline const std::map<std::string, CollisionPolicy>& collision_names() {
  static const std::map<std::string, CollisionPolicy> m{{"abort", CollisionPolicy::abort}, {"clamp", CollisionPolicy::clamp}};
  return m;
}
inline const std::map<std::string, BoundsPolicy>& bounds_names() {
  static const std::map<std::string, BoundsPolicy> m{
      {"abort", BoundsPolicy::abort}, {"clamp_and_flag", BoundsPolicy::clamp_and_flag}, {"flag_only", BoundsPolicy::flag_only}};
  return m;
}

}  // namespace detail

/// Re-checks every precondition of the modules the scenario touches.
inline void validate(const ScenarioConfig& c, FieldReader& r) {
  r.check(c.v0 > 0.0 && std::isfinite(c.v0), "v0 must be finite and > 0");
  r.check(c.ell > 0.0 && std::isfinite(c.ell), "ell must be finite and > 0");
  r.check(c.t_gap > 0.0 && std::isfinite(c.t_gap), "t_gap must be finite and > 0");
  r.check(std::isfinite(c.tau), "tau must be finite");
  r.check(c.dt > 0.0 && std::isfinite(c.dt), "dt must be finite and > 0");
  r.check(c.t_end >= 0.0 && std::isfinite(c.t_end), "t_end must be finite and >= 0");
  r.check(c.record_stride >= 1, "record_stride must be >= 1");
  r.check(c.n_agents >= 2, "n_agents must be >= 2");
  r.check(c.ring_length > 0.0 && std::isfinite(c.ring_length), "ring_length must be finite and > 0");
  r.check(c.ring_length > static_cast<double>(c.n_agents) * c.ell, "ring_length must exceed n_agents * ell");
  r.check(c.jam_gap >= 0.0, "jam_gap must be >= 0");
  r.check(c.init != InitKind::jam || static_cast<double>(c.n_agents) * (c.ell + c.jam_gap) <= c.ring_length,
          "jam block does not fit on the ring");
  r.check(c.micro_model != MicroModel::newell_delayed || c.tau > 0.0, "newell_delayed needs tau > 0");
  if (c.has_macro() && c.dx > 0.0) {
    const double m = c.ring_length / c.dx;
    r.check(std::abs(m - std::round(m)) <= 1e-9 * m && std::round(m) >= 3.0, "ring_length / dx must be an integer >= 3");
    if (c.scheme == Scheme::godunov_exact)
      r.check(c.tau < c.dx / c.v0, "godunov_exact needs tau < dx / v0");
  }
  r.check(c.dx > 0.0 && std::isfinite(c.dx), "dx must be finite and > 0");
}

inline ScenarioConfig parse_scenario(const KeyValues& kv, const std::string& source = "config") {
  ScenarioConfig c;
  FieldReader r(kv, source);
  r.choice("model", c.model, detail::model_names());
  r.choice("scheme", c.scheme, scheme_names());
  r.choice("micro_model", c.micro_model, detail::micro_model_names());
  r.number("v0", c.v0);
  r.number("ell", c.ell);
  r.number("t_gap", c.t_gap);
  r.number("ring_length", c.ring_length);
  r.integer("n_agents", c.n_agents);
  r.number("tau", c.tau);
  r.number("dt", c.dt);
  r.number("dx", c.dx);
  r.number("t_end", c.t_end);
  r.choice("init", c.init, init_names());
  r.integer("seed", c.seed);
  r.integer("record_stride", c.record_stride);
  r.number("jam_gap", c.jam_gap);
  r.number("perturbation", c.perturbation);
  r.choice("collision", c.collision, detail::collision_names());
  r.choice("bounds", c.bounds, detail::bounds_names());
  r.text("out_dir", c.out_dir);
  validate(c, r);
  r.finish();
  return c;
}

inline std::string echo(const ScenarioConfig& c) {
  std::ostringstream os;
  os << "model = " << enum_label(c.model, detail::model_names()) << '\n'
     << "scheme = " << enum_label(c.scheme, scheme_names()) << '\n'
     << "micro_model = " << enum_label(c.micro_model, detail::micro_model_names()) << '\n'
     << "v0 = " << detail::exact(c.v0) << '\n'
     << "ell = " << detail::exact(c.ell) << '\n'
     << "t_gap = " << detail::exact(c.t_gap) << '\n'
     << "ring_length = " << detail::exact(c.ring_length) << '\n'
     << "n_agents = " << c.n_agents << '\n'
     << "tau = " << detail::exact(c.tau) << '\n'
     << "dt = " << detail::exact(c.dt) << '\n'
     << "dx = " << detail::exact(c.dx) << '\n'
     << "t_end = " << detail::exact(c.t_end) << '\n'
     << "init = " << enum_label(c.init, init_names()) << '\n'
     << "seed = " << c.seed << '\n'
     << "record_stride = " << c.record_stride << '\n'
     << "jam_gap = " << detail::exact(c.jam_gap) << '\n'
     << "perturbation = " << detail::exact(c.perturbation) << '\n'
     << "collision = " << enum_label(c.collision, detail::collision_names()) << '\n'
     << "bounds = " << enum_label(c.bounds, detail::bounds_names()) << '\n'
     << "out_dir = " << c.out_dir << '\n';
  return os.str();
}

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) { return echo(a) == echo(b); }

// Ring of length 101 with 50 vehicles, triangular diagram (V0 = 2, ell = T = 1),
// tau = 1, dt = 0.01, dx = 2.02, both models, exact Godunov scheme.
inline std::string preset_text(const std::string& name) {
  const std::string base =
      "model = both\nscheme = godunov_exact\nv0 = 2\nell = 1\nt_gap = 1\nring_length = 101\nn_agents = 50\n"
      "tau = 1\ndt = 0.01\ndx = 2.02\nrecord_stride = 100\nseed = 1\n";
  if (name == "paper-jam") return base + "init = jam\nt_end = 100\nout_dir = out/jam\n";
  if (name == "paper-random") return base + "init = random\nt_end = 1000\nout_dir = out/random\n";
  if (name == "paper-perturbed") return base + "init = perturbed\nt_end = 1000\nout_dir = out/perturbed\n";
  return {};
}

/// Loads a scenario from a file, or from a built-in preset when no file of
/// that name exists.
inline ScenarioConfig load_scenario(const std::string& path_or_preset) {
  std::ifstream in(path_or_preset);
  if (in) return parse_scenario(parse_key_values(in, path_or_preset), path_or_preset);
  const auto text = preset_text(path_or_preset);
  if (text.empty()) throw ConfigError("cannot open '" + path_or_preset + "' and no preset has that name");
  return parse_scenario(parse_key_values(text, path_or_preset), path_or_preset);
}

// ---------------------------------------------------------------------------
// Stability map specifications

inline const std::map<std::string, StabilityScheme>& stability_scheme_names() {
  static const std::map<std::string, StabilityScheme> m{{"godunov_euler", StabilityScheme::godunov_euler},
                                                        {"godunov_godunov", StabilityScheme::godunov_godunov},
                                                        {"godunov_exact", StabilityScheme::godunov_exact}};
  return m;
}

inline MapSpec parse_map_spec(const KeyValues& kv, const std::string& source = "mapspec") {
  MapSpec s;
  s.base.dt = 0.01;
  s.tau_min = -1.0;
  s.tau_max = 2.0;
  s.y_min = 0.02;
  s.y_max = 3.0;
  FieldReader r(kv, source);
  r.choice("scheme", s.base.scheme, stability_scheme_names());
  static const std::map<std::string, MapAxis> axes{{"dt", MapAxis::dt}, {"rho_e", MapAxis::rho_e}};
  r.choice("axis", s.axis, axes);
  r.number("rho_e", s.base.rho_e);
  r.number("tau", s.base.tau);
  r.number("t_gap", s.base.t_gap);
  r.number("ell", s.base.ell);
  r.number("dx", s.base.dx);
  r.number("dt", s.base.dt);
  r.integer("n_cells", s.base.n_cells);
  r.number("v0", s.base.v0);
  r.number("tau_min", s.tau_min);
  r.number("tau_max", s.tau_max);
  r.integer("tau_n", s.tau_n);
  r.number("y_min", s.y_min);
  r.number("y_max", s.y_max);
  r.integer("y_n", s.y_n);
  r.integer("threads", s.threads);
  r.check(s.tau_n >= 1 && s.y_n >= 1, "resolution must be >= 1");
  r.check(s.tau_n > 1 || s.tau_min == s.tau_max, "tau_n = 1 needs tau_min = tau_max");
  r.check(s.y_n > 1 || s.y_min == s.y_max, "y_n = 1 needs y_min = y_max");
  r.check(std::isfinite(s.tau_min) && std::isfinite(s.tau_max) && s.tau_min <= s.tau_max, "tau range must be finite and ordered");
  r.check(std::isfinite(s.y_min) && std::isfinite(s.y_max) && s.y_min <= s.y_max, "y range must be finite and ordered");
  r.check(s.y_min > 0.0, "y_min must be > 0");
  r.check(s.base.n_cells >= 2, "n_cells must be >= 2");
  r.check(s.base.dx > 0.0 && s.base.t_gap > 0.0 && s.base.ell > 0.0 && s.base.dt > 0.0, "dx, t_gap, ell and dt must be > 0");
  r.check(s.axis == MapAxis::rho_e || (s.base.rho_e > 0.0 && s.base.rho_e * s.base.ell < 1.0), "rho_e must lie in (0, 1/ell)");
  r.check(s.axis == MapAxis::dt || s.y_max * s.base.ell < 1.0, "rho_e range must stay below 1/ell");
  r.finish();
  return s;
}

// Operating point of the ring experiment: N = 50, dx = 2.02 = 1/rho_e, T = ell = 1.
inline std::string map_preset_text(const std::string& name) {
  const std::string base = "rho_e = 0.495049504950495\nt_gap = 1\nell = 1\ndx = 2.02\ndt = 0.01\ntau = 1\nn_cells = 50\nv0 = 2\n"
                           "axis = dt\ntau_min = -1\ntau_max = 2\ntau_n = 200\ny_min = 0.02\ny_max = 3\ny_n = 200\n";
  if (name == "f1") return base + "scheme = godunov_euler\n";
  if (name == "f23") return base + "scheme = godunov_godunov\n";
  if (name == "f3") return base + "scheme = godunov_exact\n";
  return {};
}

inline MapSpec load_map_spec(const std::string& path_or_preset) {
  std::ifstream in(path_or_preset);
  if (in) return parse_map_spec(parse_key_values(in, path_or_preset), path_or_preset);
  const auto text = map_preset_text(path_or_preset);
  if (text.empty()) throw ConfigError("cannot open '" + path_or_preset + "' and no map preset has that name");
  return parse_map_spec(parse_key_values(text, path_or_preset), path_or_preset);
}

// ---------------------------------------------------------------------------
// Fundamental-diagram plots

struct FDParams {
  double v0 = 2.0, ell = 1.0, t_gap = 1.0, tau = 1.0;
  std::size_t n_points = 500;
  double eps = -1.0;  // overlay slack; negative means 5% of v0
};

inline FDParams parse_fd_params(const KeyValues& kv, const std::string& source = "params") {
  FDParams p;
  FieldReader r(kv, source);
  r.number("v0", p.v0);
  r.number("ell", p.ell);
  r.number("t_gap", p.t_gap);
  r.number("tau", p.tau);
  r.integer("n_points", p.n_points);
  r.number("eps", p.eps);
  r.check(p.v0 > 0.0 && std::isfinite(p.v0), "v0 must be finite and > 0");
  r.check(p.ell > 0.0 && std::isfinite(p.ell), "ell must be finite and > 0");
  r.check(p.t_gap > 0.0 && std::isfinite(p.t_gap), "t_gap must be finite and > 0");
  r.check(std::isfinite(p.tau), "tau must be finite");
  r.check(p.n_points >= 2, "n_points must be >= 2");
  r.finish();
  return p;
}

// Pedestrians: V0 = 0.9 m/s, ell = 0.3 m, T = tau = 1 s.
// Vehicles:    V0 = 15 m/s,  ell = 5 m,   T = tau = 2 s.
inline std::string fd_preset_text(const std::string& name) {
  if (name == "pedestrian") return "v0 = 0.9\nell = 0.3\nt_gap = 1\ntau = 1\n";
  if (name == "vehicle") return "v0 = 15\nell = 5\nt_gap = 2\ntau = 2\n";
  return {};
}

inline FDParams load_fd_params(const std::string& path_or_preset) {
  std::ifstream in(path_or_preset);
  if (in) return parse_fd_params(parse_key_values(in, path_or_preset), path_or_preset);
  const auto text = fd_preset_text(path_or_preset);
  if (text.empty()) throw ConfigError("cannot open '" + path_or_preset + "' and no preset has that name");
  return parse_fd_params(parse_key_values(text, path_or_preset), path_or_preset);
}

}  // namespace delayflow

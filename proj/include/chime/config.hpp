#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "chime/scenarios.hpp"

namespace chime {

using Json = nlohmann::ordered_json;

// Configuration problems are user errors (bad file, bad key, bad value) and
// map to the usage exit code, unlike numerical failures during a run.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// One branch component of a custom mover: slope * parameter plus a finite
// trigonometric series.  Only spatial and compact components are given; the
// time component is always recomputed from the null condition.
struct BranchComponent {
  Real slope = 0.0;
  Real constant = 0.0;
  std::vector<Real> cos_k, sin_k;
};

struct MoverSpec {
  int base_dim = 4;
  std::vector<BranchComponent> a, b;  // length base_dim: x^1..x^{d-1}, phi
};

// Parsed and validated settings.  Scalar defaults live here; per-scenario
// defaults are applied while parsing.  `scenario` is filled by
// finalize_config once flag overrides are in.
struct RunConfig {
  std::string scenario_id;
  int n = 256;
  Real dtau_factor = 0.25;  // dtau = factor * h
  Real mu0 = 1.0;
  Real g44 = 1.0;
  Real periods = 1.0;  // run length in units of the 2*pi tau period
  long steps = -1;     // explicit step count; mutually exclusive with periods
  bool periods_explicit = false;
  long cadence = 0;  // 0 = derived (about 128 diagnostic rows per run)
  std::uint64_t seed = 1;
  int dim = 1;
  int base_dim = 4;
  Real amp = 0.0;
  Real speed = 0.6;
  Real c_a = 0.0, c_b = 0.0;
  Real radius = 1.0;
  bool dump_frames = false;
  std::vector<int> grids{64, 128, 256};
  MoverSpec mover;

  Scenario scenario;  // resolved by finalize_config
  Mover mover_built;  // underlying mover for mover scenarios (null-checked)

  Real h() const { return kTwoPi / n; }
  Real dtau() const { return dtau_factor * h(); }
  long resolved_steps() const {
    if (steps >= 0) return steps;
    return std::lround(periods * kTwoPi / dtau());
  }
  long resolved_cadence() const {
    if (cadence > 0) return cadence;
    const long s = resolved_steps();
    return s <= 128 ? 1 : (s + 127) / 128;
  }
};

// ---------------------------------------------------------------------------
// Key catalog.  Global keys apply to every scenario; the per-scenario sets
// gate the remaining knobs so that a key on the wrong scenario is flagged
// instead of silently ignored.
// ---------------------------------------------------------------------------
inline const std::set<std::string>& config_global_keys() {
  static const std::set<std::string> keys = {
      "scenario", "n",     "dtau_factor", "mu0",         "g44",  "periods",
      "steps",    "cadence", "dump_frames", "grids"};
  return keys;
}

inline const std::vector<std::string>& scenario_catalog() {
  static const std::vector<std::string> ids = {
      "flat_sheet",     "boosted_sheet",   "chiral_sheet", "random_smooth",
      "collapsing_loop", "double_rotator", "chiral_loop",  "nonchiral_control",
      "analysis_circle", "custom_mover"};
  return ids;
}

inline std::set<std::string> config_scenario_keys(const std::string& id) {
  if (id == "flat_sheet") return {"dim", "base_dim"};
  if (id == "boosted_sheet") return {"speed", "base_dim"};
  if (id == "chiral_sheet") return {"amp", "base_dim"};
  if (id == "random_smooth") return {"seed", "dim", "base_dim", "amp"};
  if (id == "collapsing_loop") return {"base_dim"};
  if (id == "double_rotator") return {"c_a", "c_b"};
  if (id == "chiral_loop") return {"c_a"};
  if (id == "nonchiral_control") return {"c_a", "c_b"};
  if (id == "analysis_circle") return {"radius"};
  if (id == "custom_mover") return {"mover"};
  std::string all;
  for (const auto& s : scenario_catalog()) all += (all.empty() ? "" : ", ") + s;
  throw ConfigError("unknown scenario \"" + id + "\"; available: " + all);
}

// ---------------------------------------------------------------------------
// Typed extraction with errors that name the offending key.
// ---------------------------------------------------------------------------
namespace detail {

inline Real get_real(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_number()) throw ConfigError("key \"" + key + "\" must be a number");
  return v.get<Real>();
}

inline long get_int(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_number_integer() && !v.is_number_unsigned())
    throw ConfigError("key \"" + key + "\" must be an integer");
  return v.get<long>();
}

inline std::uint64_t get_uint(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0)))
    throw ConfigError("key \"" + key + "\" must be a non-negative integer");
  return v.get<std::uint64_t>();
}

inline bool get_bool(const Json& j, const std::string& key) {
  const Json& v = j.at(key);
  if (!v.is_boolean()) throw ConfigError("key \"" + key + "\" must be true or false");
  return v.get<bool>();
}

inline std::vector<Real> get_real_array(const Json& v, const std::string& what) {
  if (!v.is_array()) throw ConfigError(what + " must be an array of numbers");
  std::vector<Real> out;
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(what + " must be an array of numbers");
    out.push_back(e.get<Real>());
  }
  return out;
}

inline BranchComponent parse_branch_component(const Json& v, const std::string& what) {
  if (!v.is_object()) throw ConfigError(what + " must be an object");
  static const std::set<std::string> allowed = {"slope", "const", "cos", "sin"};
  for (const auto& item : v.items())
    if (!allowed.count(item.key()))
      throw ConfigError(what + ": unknown key \"" + item.key() + "\"");
  BranchComponent bc;
  if (v.contains("slope")) bc.slope = get_real(v, "slope");
  if (v.contains("const")) bc.constant = get_real(v, "const");
  if (v.contains("cos")) bc.cos_k = get_real_array(v.at("cos"), what + ".cos");
  if (v.contains("sin")) bc.sin_k = get_real_array(v.at("sin"), what + ".sin");
  return bc;
}

inline std::vector<BranchComponent> parse_branch(const Json& v, const std::string& what,
                                                 int count) {
  if (!v.is_array() || static_cast<int>(v.size()) != count)
    throw ConfigError(what + " must be an array of " + std::to_string(count) +
                      " component objects (x^1..x^{d-1}, phi)");
  std::vector<BranchComponent> out;
  for (int i = 0; i < count; ++i)
    out.push_back(parse_branch_component(v.at(i), what + "[" + std::to_string(i) + "]"));
  return out;
}

inline MoverSpec parse_mover_spec(const Json& v) {
  if (!v.is_object()) throw ConfigError("key \"mover\" must be an object");
  static const std::set<std::string> allowed = {"base_dim", "a", "b"};
  for (const auto& item : v.items())
    if (!allowed.count(item.key()))
      throw ConfigError("mover: unknown key \"" + item.key() + "\"");
  MoverSpec ms;
  if (v.contains("base_dim")) ms.base_dim = static_cast<int>(get_int(v, "base_dim"));
  if (ms.base_dim < 2 || ms.base_dim + 1 > kMaxAmbient)
    throw ConfigError("mover.base_dim out of range");
  if (!v.contains("a") || !v.contains("b"))
    throw ConfigError("mover needs branch arrays \"a\" and \"b\"");
  ms.a = parse_branch(v.at("a"), "mover.a", ms.base_dim);
  ms.b = parse_branch(v.at("b"), "mover.b", ms.base_dim);
  return ms;
}

inline Json branch_component_json(const BranchComponent& bc) {
  Json v = Json::object();
  v["slope"] = bc.slope;
  v["const"] = bc.constant;
  v["cos"] = bc.cos_k;
  v["sin"] = bc.sin_k;
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Custom movers: the user supplies the spatial and compact components of the
// two null branches; the time component is recomputed (re-normalized) so each
// branch is exactly null, by integrating the branch speed.  A residual above
// 1e-10 after the fit (e.g. from a branch whose speed is not smooth) rejects
// the mover.
// ---------------------------------------------------------------------------
namespace detail {

inline FourierSeries series_from(const BranchComponent& bc) {
  FourierSeries f;
  f.a0 = bc.constant;
  f.ak = bc.cos_k;
  f.bk = bc.sin_k;
  const size_t m = std::max(f.ak.size(), f.bk.size());
  f.ak.resize(m, 0.0);
  f.bk.resize(m, 0.0);
  return f;
}

// Recompute the time component of one branch so the branch is null: t' equals
// sign * speed(u) with speed from the user-supplied spatial and compact
// components.  The left mover takes sign = +1 and the right mover sign = -1;
// the embedding advances in time as half the slope difference, so the two
// branches must run through time in opposite parameter directions.
inline void fit_null_time(const Background& bg, std::vector<Real>& slope,
                          std::vector<FourierSeries>& per, Real sign) {
  const int T = bg.total_dim();
  const int samples = 1024;
  std::vector<Real> speed(samples);
  Real mean = 0.0;
  for (int i = 0; i < samples; ++i) {
    const Real u = kTwoPi * i / samples;
    Real s2 = 0.0;
    for (int m = 1; m < T; ++m) {
      const Real d = slope[m] + per[m].eval_derivative(u);
      s2 += bg.metric_diag(m) * d * d;
    }
    speed[i] = std::sqrt(s2);
    mean += speed[i];
  }
  mean /= samples;
  for (Real& s : speed) s = sign * (s - mean);
  FourierSeries fluct = fourier_fit(speed);
  fluct.a0 = 0.0;
  slope[0] = sign * mean;
  per[0] = fluct.antiderivative();
}

}  // namespace detail

inline Mover build_custom_mover(const MoverSpec& ms, Real g44) {
  Mover mv;
  mv.bg = Background(ms.base_dim, g44);
  const int T = mv.total_dim();
  mv.slope_a.assign(T, 0.0);
  mv.slope_b.assign(T, 0.0);
  mv.per_a.assign(T, FourierSeries{});
  mv.per_b.assign(T, FourierSeries{});
  for (int m = 1; m < T; ++m) {
    mv.slope_a[m] = ms.a[m - 1].slope;
    mv.per_a[m] = detail::series_from(ms.a[m - 1]);
    mv.slope_b[m] = ms.b[m - 1].slope;
    mv.per_b[m] = detail::series_from(ms.b[m - 1]);
  }
  detail::fit_null_time(mv.bg, mv.slope_a, mv.per_a, +1.0);
  detail::fit_null_time(mv.bg, mv.slope_b, mv.per_b, -1.0);
  return mv;
}

// ---------------------------------------------------------------------------
// Parsing.  parse_config validates keys and values and fills defaults;
// finalize_config builds the scenario (so CLI flag overrides can be applied
// in between).
// ---------------------------------------------------------------------------
inline RunConfig parse_config(const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("scenario")) throw ConfigError("config needs key \"scenario\"");
  if (!j.at("scenario").is_string()) throw ConfigError("key \"scenario\" must be a string");

  RunConfig cfg;
  cfg.scenario_id = j.at("scenario").get<std::string>();
  const std::set<std::string> extra = config_scenario_keys(cfg.scenario_id);
  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    if (config_global_keys().count(key) || extra.count(key)) continue;
    // Recognised elsewhere in the schema?  Then it is misplaced, not unknown.
    bool known = false;
    for (const auto& id : scenario_catalog())
      if (config_scenario_keys(id).count(key)) known = true;
    if (known)
      throw ConfigError("key \"" + key + "\" does not apply to scenario \"" +
                        cfg.scenario_id + "\"");
    throw ConfigError("unknown key \"" + key + "\"");
  }

  // Per-scenario defaults (overridden below when the key is present).
  if (cfg.scenario_id == "chiral_sheet") cfg.amp = 0.2;
  if (cfg.scenario_id == "random_smooth") cfg.amp = 0.05;
  if (cfg.scenario_id == "double_rotator") { cfg.c_a = 0.3; cfg.c_b = 0.1; }
  if (cfg.scenario_id == "chiral_loop") { cfg.c_a = 0.05; cfg.c_b = 0.0; }
  if (cfg.scenario_id == "nonchiral_control") { cfg.c_a = 0.3; cfg.c_b = 0.3; }
  // Chiral runs default to a finer step: the chirality budget (1e-8 over ten
  // periods) needs the O(dtau^2) phase error well below the stencil floor.
  if (cfg.scenario_id == "chiral_loop") cfg.dtau_factor = 0.05;

  if (j.contains("n")) cfg.n = static_cast<int>(detail::get_int(j, "n"));
  if (cfg.n < 8) throw ConfigError("key \"n\" must be at least 8");
  if (j.contains("dtau_factor")) cfg.dtau_factor = detail::get_real(j, "dtau_factor");
  if (!(cfg.dtau_factor > 0.0) || cfg.dtau_factor > 0.5)
    throw ConfigError("key \"dtau_factor\" must lie in (0, 0.5] (CFL bound)");
  if (j.contains("mu0")) cfg.mu0 = detail::get_real(j, "mu0");
  if (!(cfg.mu0 > 0.0)) throw ConfigError("key \"mu0\" must be positive");
  if (j.contains("g44")) cfg.g44 = detail::get_real(j, "g44");
  if (!(cfg.g44 > 0.0))
    throw ConfigError("key \"g44\" must be positive (got " + std::to_string(cfg.g44) +
                      "): the compact direction carries a positive metric factor");
  if (j.contains("steps") && j.contains("periods"))
    throw ConfigError("give either \"steps\" or \"periods\", not both");
  if (j.contains("steps")) {
    cfg.steps = detail::get_int(j, "steps");
    if (cfg.steps < 0) throw ConfigError("key \"steps\" must be non-negative");
  }
  if (j.contains("periods")) {
    cfg.periods = detail::get_real(j, "periods");
    cfg.periods_explicit = true;
    if (!(cfg.periods > 0.0)) throw ConfigError("key \"periods\" must be positive");
  }
  if (j.contains("cadence")) {
    cfg.cadence = detail::get_int(j, "cadence");
    if (cfg.cadence < 1) throw ConfigError("key \"cadence\" must be at least 1");
  }
  if (j.contains("dump_frames")) cfg.dump_frames = detail::get_bool(j, "dump_frames");
  if (j.contains("grids")) {
    cfg.grids.clear();
    const Json& g = j.at("grids");
    if (!g.is_array() || g.size() < 2)
      throw ConfigError("key \"grids\" must be an array of at least two grid sizes");
    for (const auto& e : g) {
      if (!e.is_number_integer() && !e.is_number_unsigned())
        throw ConfigError("key \"grids\" must contain integers");
      cfg.grids.push_back(e.get<int>());
    }
    for (size_t i = 0; i < cfg.grids.size(); ++i) {
      if (cfg.grids[i] < 8) throw ConfigError("key \"grids\": sizes must be at least 8");
      if (i > 0 && cfg.grids[i] <= cfg.grids[i - 1])
        throw ConfigError("key \"grids\" must be strictly increasing");
    }
  }

  if (j.contains("dim")) cfg.dim = static_cast<int>(detail::get_int(j, "dim"));
  if (cfg.dim < 1 || cfg.dim > 2) throw ConfigError("key \"dim\" must be 1 or 2");
  if (j.contains("base_dim")) cfg.base_dim = static_cast<int>(detail::get_int(j, "base_dim"));
  if (cfg.base_dim < 2 || cfg.base_dim + 1 > kMaxAmbient)
    throw ConfigError("key \"base_dim\" out of range");
  if (j.contains("amp")) cfg.amp = detail::get_real(j, "amp");
  if (j.contains("speed")) cfg.speed = detail::get_real(j, "speed");
  if (std::abs(cfg.speed) >= 1.0)
    throw ConfigError("key \"speed\" must be subluminal (|speed| < 1)");
  if (j.contains("seed")) cfg.seed = detail::get_uint(j, "seed");
  if (j.contains("c_a")) cfg.c_a = detail::get_real(j, "c_a");
  if (j.contains("c_b")) cfg.c_b = detail::get_real(j, "c_b");
  if (cfg.scenario_id == "nonchiral_control" && (cfg.c_a == 0.0 || cfg.c_b == 0.0))
    throw ConfigError("nonchiral_control needs both \"c_a\" and \"c_b\" nonzero");
  if (j.contains("radius")) cfg.radius = detail::get_real(j, "radius");
  if (!(cfg.radius > 0.0)) throw ConfigError("key \"radius\" must be positive");
  if (cfg.scenario_id == "custom_mover") {
    if (!j.contains("mover")) throw ConfigError("custom_mover needs key \"mover\"");
    cfg.mover = detail::parse_mover_spec(j.at("mover"));
  }
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// Builds the scenario (and for mover scenarios checks the null normalization
// to 1e-10, rejecting otherwise).  Call after any flag overrides.
inline void finalize_config(RunConfig& cfg) {
  const std::string& id = cfg.scenario_id;
  auto checked_mover = [&cfg](Mover mv) {
    const Real res = mv.null_residual();
    if (!(res <= 1e-10)) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.3g", res);
      throw ConfigError(std::string("mover normalization failed: null residual ") + buf +
                        " exceeds 1e-10");
    }
    cfg.mover_built = mv;
    return mv;
  };
  if (id == "flat_sheet") {
    cfg.scenario = make_flat_sheet(cfg.dim, cfg.base_dim, cfg.g44);
  } else if (id == "boosted_sheet") {
    cfg.scenario = make_boosted_sheet(cfg.speed, cfg.base_dim, cfg.g44);
  } else if (id == "chiral_sheet") {
    cfg.scenario = make_chiral_sheet(cfg.amp, cfg.base_dim, cfg.g44);
  } else if (id == "random_smooth") {
    cfg.scenario = make_random_smooth(cfg.seed, cfg.dim, cfg.base_dim, cfg.g44, cfg.amp);
  } else if (id == "collapsing_loop") {
    cfg.scenario =
        mover_scenario(checked_mover(make_collapsing_loop_mover(cfg.base_dim, cfg.g44)),
                       "collapsing_loop");
  } else if (id == "double_rotator") {
    cfg.scenario = mover_scenario(
        checked_mover(make_double_rotator_mover(cfg.c_a, cfg.c_b, cfg.g44)),
        "double_rotator");
  } else if (id == "chiral_loop") {
    cfg.scenario = mover_scenario(
        checked_mover(make_double_rotator_mover(cfg.c_a, 0.0, cfg.g44)), "chiral_loop");
  } else if (id == "nonchiral_control") {
    cfg.scenario = mover_scenario(
        checked_mover(make_double_rotator_mover(cfg.c_a, cfg.c_b, cfg.g44)),
        "nonchiral_control");
  } else if (id == "analysis_circle") {
    cfg.scenario = make_analysis_circle(cfg.radius, cfg.g44);
  } else if (id == "custom_mover") {
    cfg.scenario =
        mover_scenario(checked_mover(build_custom_mover(cfg.mover, cfg.g44)), "custom_mover");
  } else {
    config_scenario_keys(id);  // throws with the catalog list
  }
}

// Canonical serialized form.  Emits the resolved value of every key that
// applies to the scenario, so parse(serialize(cfg)) reproduces cfg exactly
// and the output doubles as schema documentation.
inline Json serialize_config(const RunConfig& cfg) {
  Json j = Json::object();
  j["scenario"] = cfg.scenario_id;
  j["n"] = cfg.n;
  j["dtau_factor"] = cfg.dtau_factor;
  j["mu0"] = cfg.mu0;
  j["g44"] = cfg.g44;
  if (cfg.steps >= 0)
    j["steps"] = cfg.steps;
  else if (cfg.periods_explicit)
    j["periods"] = cfg.periods;
  if (cfg.cadence > 0) j["cadence"] = cfg.cadence;
  if (cfg.dump_frames) j["dump_frames"] = true;
  j["grids"] = cfg.grids;
  const std::set<std::string> extra = config_scenario_keys(cfg.scenario_id);
  if (extra.count("dim")) j["dim"] = cfg.dim;
  if (extra.count("base_dim")) j["base_dim"] = cfg.base_dim;
  if (extra.count("amp")) j["amp"] = cfg.amp;
  if (extra.count("speed")) j["speed"] = cfg.speed;
  if (extra.count("seed")) j["seed"] = cfg.seed;
  if (extra.count("c_a")) j["c_a"] = cfg.c_a;
  if (extra.count("c_b")) j["c_b"] = cfg.c_b;
  if (extra.count("radius")) j["radius"] = cfg.radius;
  if (extra.count("mover")) {
    Json mv = Json::object();
    mv["base_dim"] = cfg.mover.base_dim;
    Json a = Json::array(), b = Json::array();
    for (const auto& bc : cfg.mover.a) a.push_back(detail::branch_component_json(bc));
    for (const auto& bc : cfg.mover.b) b.push_back(detail::branch_component_json(bc));
    mv["a"] = a;
    mv["b"] = b;
    j["mover"] = mv;
  }
  return j;
}

}  // namespace chime

#pragma once

// Run configuration: YAML reading with line/column diagnostics and writing
// back to YAML. Everything the CLI needs lives in RunConfig.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "netphase/control.hpp"
#include "netphase/dynamics.hpp"
#include "netphase/metrics.hpp"
#include "netphase/topology.hpp"

namespace netphase {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Layout : std::uint8_t { Random, Clustered, Uniform };

inline const char* to_string(Layout l) {
  switch (l) {
    case Layout::Random: return "random";
    case Layout::Clustered: return "clustered";
    case Layout::Uniform: return "uniform";
  }
  return "?";
}

/// Explicit occupancy, or a density with a placement layout.
struct InitialSpec {
  std::vector<double> occupancy;  // non-empty: used as is
  double density = 0.0;
  std::uint64_t seed = 1;
  Layout layout = Layout::Random;

  bool operator==(const InitialSpec&) const = default;
};

struct GridSpec {
  enum class Kind : std::uint8_t { Full, Linspace, Values };
  Kind kind = Kind::Full;
  double from = 0.0, to = 1.0;
  int points = 21;
  std::vector<double> values;

  bool operator==(const GridSpec&) const = default;

  std::vector<double> densities(const NetworkTopology& t) const {
    std::vector<double> g;
    switch (kind) {
      case Kind::Full:
        for (int N = 0; N <= t.counting_size(); ++N) g.push_back(static_cast<double>(N) / t.counting_size());
        break;
      case Kind::Linspace:
        for (int i = 0; i < points; ++i)
          g.push_back(points == 1 ? from : from + (to - from) * i / (points - 1));
        break;
      case Kind::Values: g = values; break;
    }
    return g;
  }
};

struct RunConfig {
  std::vector<TopologySpec> topologies{TopologySpec{Family::FigureEight, 5, 5}};
  Mode mode = Mode::Discrete;
  std::vector<PolicySpec> policies{PolicySpec{}};
  InitialSpec initial;
  std::int64_t steps = 20;
  GridSpec grid;
  std::int64_t K = 0;         // 0: default horizon
  std::int64_t burn_in = -1;  // negative: K / 2
  double tolerance = 1e-3;
  int seeds = 3;
  std::uint64_t base_seed = 1;
  bool per_road = false;
  double eps = 0.02;
  double band = 0.25;  // response band, absolute distance
  unsigned threads = 0;
  std::string out = "out";

  bool operator==(const RunConfig&) const = default;
};

namespace detail {

inline std::string where(const YAML::Node& n) {
  const auto m = n.Mark();
  if (m.is_null()) return "";
  return std::to_string(m.line + 1) + ":" + std::to_string(m.column + 1) + ": ";
}

[[noreturn]] inline void config_fail(const YAML::Node& n, const std::string& key, const std::string& msg) {
  throw ConfigError(where(n) + "key '" + key + "': " + msg);
}

template <class T>
T scalar(const YAML::Node& n, const std::string& key) {
  if (!n.IsScalar()) config_fail(n, key, "expected a single value");
  try {
    return n.as<T>();
  } catch (const YAML::BadConversion&) {
    config_fail(n, key, "cannot read '" + n.Scalar() + "'");
  }
}

template <class T>
std::vector<T> sequence(const YAML::Node& n, const std::string& key) {
  if (!n.IsSequence()) config_fail(n, key, "expected a list");
  std::vector<T> v;
  for (std::size_t i = 0; i < n.size(); ++i) v.push_back(scalar<T>(n[i], key + "[" + std::to_string(i) + "]"));
  return v;
}

inline void require_map(const YAML::Node& n, const std::string& key) {
  if (!n.IsMap()) config_fail(n, key, "expected a mapping");
}

inline void allowed_keys(const YAML::Node& n, const std::string& prefix, std::initializer_list<const char*> keys) {
  for (const auto& kv : n) {
    const auto k = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : keys) ok = ok || k == a;
    if (!ok) config_fail(kv.first, prefix + k, "unknown key");
  }
}

inline TopologySpec read_topology(const YAML::Node& n, const std::string& key) {
  require_map(n, key);
  allowed_keys(n, key + ".", {"family", "n", "m", "lengths", "rows", "cols", "segment_len", "capacity"});
  if (!n["family"]) config_fail(n, key + ".family", "missing");
  TopologySpec s;
  const auto fam = scalar<std::string>(n["family"], key + ".family");
  if (fam == "figure_eight") {
    s.family = Family::FigureEight;
    if (!n["n"] || !n["m"]) config_fail(n, key, "figure_eight needs n and m");
    s.n = scalar<int>(n["n"], key + ".n");
    s.m = scalar<int>(n["m"], key + ".m");
  } else if (fam == "two_junction") {
    s.family = Family::TwoJunction;
    if (!n["lengths"]) config_fail(n, key, "two_junction needs lengths");
    auto l = sequence<int>(n["lengths"], key + ".lengths");
    if (l.size() != 4) config_fail(n["lengths"], key + ".lengths", "expected 4 road sizes");
    std::copy(l.begin(), l.end(), s.lengths.begin());
  } else if (fam == "torus_city") {
    s.family = Family::TorusCity;
    if (!n["rows"] || !n["cols"] || !n["segment_len"])
      config_fail(n, key, "torus_city needs rows, cols and segment_len");
    s.rows = scalar<int>(n["rows"], key + ".rows");
    s.cols = scalar<int>(n["cols"], key + ".cols");
    s.segment_len = scalar<int>(n["segment_len"], key + ".segment_len");
  } else {
    config_fail(n["family"], key + ".family", "unknown family '" + fam + "'");
  }
  if (n["capacity"]) s.capacity = scalar<int>(n["capacity"], key + ".capacity");
  try {
    build_topology(s);
  } catch (const TopologyError& e) {
    config_fail(n, key, e.what());
  }
  return s;
}

inline PolicySpec read_policy(const YAML::Node& n, const std::string& key) {
  PolicySpec p;
  const YAML::Node kind = n.IsMap() ? n["kind"] : n;
  if (!kind) config_fail(n, key + ".kind", "missing");
  const auto name = scalar<std::string>(kind, key + ".kind");
  auto k = parse_policy(name);
  if (!k) config_fail(kind, key + ".kind", "unknown policy '" + name + "'");
  p.kind = *k;
  if (!n.IsMap()) return p;
  allowed_keys(n, key + ".",
               {"kind", "cycle", "green", "offsets", "q_scale", "r_scale", "tolerance", "max_iter"});
  if (p.kind == PolicyKind::OpenLoop) {
    if (n["cycle"]) p.plan.cycle = scalar<int>(n["cycle"], key + ".cycle");
    if (n["green"]) p.plan.green_first = scalar<int>(n["green"], key + ".green");
    if (n["offsets"]) p.plan.offsets = sequence<int>(n["offsets"], key + ".offsets");
    try {
      p.plan.validate();
    } catch (const ControlError& e) {
      config_fail(n, key, e.what());
    }
  } else if (p.kind == PolicyKind::GlobalFeedback) {
    if (n["cycle"]) p.lq_cycle = scalar<int>(n["cycle"], key + ".cycle");
    if (n["q_scale"]) p.q_scale = scalar<double>(n["q_scale"], key + ".q_scale");
    if (n["r_scale"]) p.r_scale = scalar<double>(n["r_scale"], key + ".r_scale");
    if (n["tolerance"]) p.riccati_tol = scalar<double>(n["tolerance"], key + ".tolerance");
    if (n["max_iter"]) p.riccati_max_iter = scalar<int>(n["max_iter"], key + ".max_iter");
    if (p.lq_cycle < 2) config_fail(n, key + ".cycle", "must be >= 2");
    if (!(p.q_scale >= 0)) config_fail(n, key + ".q_scale", "must be >= 0");
    if (!(p.r_scale > 0)) config_fail(n, key + ".r_scale", "must be > 0");
    if (!(p.riccati_tol > 0)) config_fail(n, key + ".tolerance", "must be > 0");
    if (p.riccati_max_iter < 1) config_fail(n, key + ".max_iter", "must be >= 1");
  } else {
    for (const auto& kv : n)
      if (kv.first.as<std::string>() != "kind")
        config_fail(kv.first, key + "." + kv.first.as<std::string>(), "not a parameter of " + name);
  }
  return p;
}

inline GridSpec read_grid(const YAML::Node& n) {
  GridSpec g;
  auto check = [&](const YAML::Node& at, double d) {
    if (!(d >= 0.0 && d <= 1.0)) config_fail(at, "grid", "densities must lie in [0,1]");
  };
  if (n.IsScalar()) {
    if (n.Scalar() != "full") config_fail(n, "grid", "expected 'full', a list or {from, to, points}");
    g.kind = GridSpec::Kind::Full;
  } else if (n.IsSequence()) {
    g.kind = GridSpec::Kind::Values;
    g.values = sequence<double>(n, "grid");
    if (g.values.empty()) config_fail(n, "grid", "empty list");
    for (std::size_t i = 0; i < g.values.size(); ++i) check(n[i], g.values[i]);
  } else if (n.IsMap()) {
    allowed_keys(n, "grid.", {"from", "to", "points"});
    g.kind = GridSpec::Kind::Linspace;
    if (n["from"]) g.from = scalar<double>(n["from"], "grid.from");
    if (n["to"]) g.to = scalar<double>(n["to"], "grid.to");
    if (n["points"]) g.points = scalar<int>(n["points"], "grid.points");
    check(n, g.from);
    check(n, g.to);
    if (g.points < 1) config_fail(n, "grid.points", "must be >= 1");
  } else {
    config_fail(n, "grid", "expected 'full', a list or {from, to, points}");
  }
  return g;
}

}  // namespace detail

/// Reads a config from YAML text. `source` prefixes diagnostics.
inline RunConfig parse_config(const std::string& text, const std::string& source = "config") {
  using namespace detail;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ":" + std::to_string(e.mark.column + 1) +
                      ": " + e.msg);
  }
  RunConfig c;
  if (root.IsNull()) return c;
  try {
    require_map(root, "<root>");
    allowed_keys(root, "",
                 {"topology", "topologies", "mode", "policy", "policies", "initial", "steps", "grid", "estimate",
                  "seeds", "base_seed", "per_road", "eps", "band", "threads", "out"});
    if (root["topology"] && root["topologies"]) config_fail(root["topologies"], "topologies", "give topology or topologies, not both");
    if (root["topology"]) c.topologies = {read_topology(root["topology"], "topology")};
    if (root["topologies"]) {
      const auto& n = root["topologies"];
      if (!n.IsSequence() || n.size() == 0) config_fail(n, "topologies", "expected a non-empty list");
      c.topologies.clear();
      for (std::size_t i = 0; i < n.size(); ++i)
        c.topologies.push_back(read_topology(n[i], "topologies[" + std::to_string(i) + "]"));
    }
    if (root["mode"]) {
      const auto m = scalar<std::string>(root["mode"], "mode");
      if (m == "continuous")
        c.mode = Mode::Continuous;
      else if (m == "discrete")
        c.mode = Mode::Discrete;
      else
        config_fail(root["mode"], "mode", "expected continuous or discrete");
    }
    if (root["policy"] && root["policies"]) config_fail(root["policies"], "policies", "give policy or policies, not both");
    if (root["policy"]) c.policies = {read_policy(root["policy"], "policy")};
    if (root["policies"]) {
      const auto& n = root["policies"];
      if (!n.IsSequence() || n.size() == 0) config_fail(n, "policies", "expected a non-empty list");
      c.policies.clear();
      for (std::size_t i = 0; i < n.size(); ++i)
        c.policies.push_back(read_policy(n[i], "policies[" + std::to_string(i) + "]"));
    }
    if (const auto& n = root["initial"]) {
      require_map(n, "initial");
      allowed_keys(n, "initial.", {"occupancy", "density", "seed", "layout"});
      if (n["occupancy"] && n["density"]) config_fail(n, "initial", "give occupancy or density, not both");
      if (n["occupancy"]) {
        c.initial.occupancy = sequence<double>(n["occupancy"], "initial.occupancy");
        try {
          validate_occupancy(build_topology(c.topologies.front()), OccupancyVector{c.initial.occupancy},
                             c.mode == Mode::Discrete);
        } catch (const DynamicsError& e) {
          config_fail(n["occupancy"], "initial.occupancy", e.what());
        }
      }
      if (n["density"]) {
        c.initial.density = scalar<double>(n["density"], "initial.density");
        if (!(c.initial.density >= 0 && c.initial.density <= 1))
          config_fail(n["density"], "initial.density", "must lie in [0,1]");
      }
      if (n["seed"]) c.initial.seed = scalar<std::uint64_t>(n["seed"], "initial.seed");
      if (n["layout"]) {
        const auto l = scalar<std::string>(n["layout"], "initial.layout");
        if (l == "random")
          c.initial.layout = Layout::Random;
        else if (l == "clustered")
          c.initial.layout = Layout::Clustered;
        else if (l == "uniform")
          c.initial.layout = Layout::Uniform;
        else
          config_fail(n["layout"], "initial.layout", "expected random, clustered or uniform");
      }
    }
    if (root["steps"]) {
      c.steps = scalar<std::int64_t>(root["steps"], "steps");
      if (c.steps < 0) config_fail(root["steps"], "steps", "must be >= 0");
    }
    if (root["grid"]) c.grid = read_grid(root["grid"]);
    if (const auto& n = root["estimate"]) {
      require_map(n, "estimate");
      allowed_keys(n, "estimate.", {"K", "burn_in", "tolerance"});
      if (n["K"]) c.K = scalar<std::int64_t>(n["K"], "estimate.K");
      if (n["burn_in"]) c.burn_in = scalar<std::int64_t>(n["burn_in"], "estimate.burn_in");
      if (n["tolerance"]) c.tolerance = scalar<double>(n["tolerance"], "estimate.tolerance");
      if (c.K < 0) config_fail(n, "estimate.K", "must be >= 0");
      if (c.K > 0 && c.burn_in >= c.K) config_fail(n, "estimate.burn_in", "must be below K");
      if (!(c.tolerance > 0)) config_fail(n, "estimate.tolerance", "must be > 0");
    }
    if (root["seeds"]) {
      c.seeds = scalar<int>(root["seeds"], "seeds");
      if (c.seeds < 1) config_fail(root["seeds"], "seeds", "must be >= 1");
    }
    if (root["base_seed"]) c.base_seed = scalar<std::uint64_t>(root["base_seed"], "base_seed");
    if (root["per_road"]) c.per_road = scalar<bool>(root["per_road"], "per_road");
    if (root["eps"]) {
      c.eps = scalar<double>(root["eps"], "eps");
      if (!(c.eps >= 0)) config_fail(root["eps"], "eps", "must be >= 0");
    }
    if (root["band"]) {
      c.band = scalar<double>(root["band"], "band");
      if (!(c.band >= 0)) config_fail(root["band"], "band", "must be >= 0");
    }
    if (root["threads"]) c.threads = scalar<unsigned>(root["threads"], "threads");
    if (root["out"]) c.out = scalar<std::string>(root["out"], "out");
  } catch (const ConfigError& e) {
    throw ConfigError(source + ":" + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

inline std::string serialize_config(const RunConfig& c) {
  YAML::Emitter y;
  y.SetDoublePrecision(17);
  y << YAML::BeginMap;
  y << YAML::Key << "topologies" << YAML::Value << YAML::BeginSeq;
  for (const auto& t : c.topologies) {
    y << YAML::Flow << YAML::BeginMap << YAML::Key << "family" << YAML::Value << to_string(t.family);
    switch (t.family) {
      case Family::FigureEight:
        y << YAML::Key << "n" << YAML::Value << t.n << YAML::Key << "m" << YAML::Value << t.m;
        break;
      case Family::TwoJunction:
        y << YAML::Key << "lengths" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (int l : t.lengths) y << l;
        y << YAML::EndSeq;
        break;
      case Family::TorusCity:
        y << YAML::Key << "rows" << YAML::Value << t.rows << YAML::Key << "cols" << YAML::Value << t.cols
          << YAML::Key << "segment_len" << YAML::Value << t.segment_len;
        break;
    }
    y << YAML::Key << "capacity" << YAML::Value << t.capacity << YAML::EndMap;
  }
  y << YAML::EndSeq;
  y << YAML::Key << "mode" << YAML::Value << to_string(c.mode);
  y << YAML::Key << "policies" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : c.policies) {
    y << YAML::Flow << YAML::BeginMap << YAML::Key << "kind" << YAML::Value << to_string(p.kind);
    if (p.kind == PolicyKind::OpenLoop) {
      y << YAML::Key << "cycle" << YAML::Value << p.plan.cycle << YAML::Key << "green" << YAML::Value
        << p.plan.green_first << YAML::Key << "offsets" << YAML::Value << YAML::Flow << p.plan.offsets;
    } else if (p.kind == PolicyKind::GlobalFeedback) {
      y << YAML::Key << "cycle" << YAML::Value << p.lq_cycle << YAML::Key << "q_scale" << YAML::Value << p.q_scale
        << YAML::Key << "r_scale" << YAML::Value << p.r_scale << YAML::Key << "tolerance" << YAML::Value
        << p.riccati_tol << YAML::Key << "max_iter" << YAML::Value << p.riccati_max_iter;
    }
    y << YAML::EndMap;
  }
  y << YAML::EndSeq;
  y << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
  if (!c.initial.occupancy.empty())
    y << YAML::Key << "occupancy" << YAML::Value << YAML::Flow << c.initial.occupancy;
  else
    y << YAML::Key << "density" << YAML::Value << c.initial.density;
  y << YAML::Key << "seed" << YAML::Value << c.initial.seed;
  y << YAML::Key << "layout" << YAML::Value << to_string(c.initial.layout);
  y << YAML::EndMap;
  y << YAML::Key << "steps" << YAML::Value << c.steps;
  y << YAML::Key << "grid" << YAML::Value;
  switch (c.grid.kind) {
    case GridSpec::Kind::Full: y << "full"; break;
    case GridSpec::Kind::Values: y << YAML::Flow << c.grid.values; break;
    case GridSpec::Kind::Linspace:
      y << YAML::Flow << YAML::BeginMap << YAML::Key << "from" << YAML::Value << c.grid.from << YAML::Key << "to"
        << YAML::Value << c.grid.to << YAML::Key << "points" << YAML::Value << c.grid.points << YAML::EndMap;
      break;
  }
  y << YAML::Key << "estimate" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "K" << YAML::Value
    << c.K << YAML::Key << "burn_in" << YAML::Value << c.burn_in << YAML::Key << "tolerance" << YAML::Value
    << c.tolerance << YAML::EndMap;
  y << YAML::Key << "seeds" << YAML::Value << c.seeds;
  y << YAML::Key << "base_seed" << YAML::Value << c.base_seed;
  y << YAML::Key << "per_road" << YAML::Value << c.per_road;
  y << YAML::Key << "eps" << YAML::Value << c.eps;
  y << YAML::Key << "band" << YAML::Value << c.band;
  y << YAML::Key << "threads" << YAML::Value << c.threads;
  y << YAML::Key << "out" << YAML::Value << c.out;
  y << YAML::EndMap;
  return std::string(y.c_str()) + "\n";
}

/// Same number of cars on every road, round(d x counting positions), spread
/// evenly over its cells. Junctions stay empty unless a road is full.
inline OccupancyVector place_uniform(const NetworkTopology& t, double d) {
  if (!(d >= 0.0 && d <= 1.0)) throw DynamicsError("density outside [0,1]");
  OccupancyVector occ{std::vector<double>(t.slot_count(), 0.0)};
  for (const auto& r : t.roads()) {
    const int cars = static_cast<int>(std::lround(d * r.counting_positions()));
    const int cells = std::min(cars, r.length_cells);
    for (int c = 0; c < cells; ++c) occ.a[r.first_slot + static_cast<std::size_t>(c) * r.length_cells / cells] = 1.0;
    if (cars > r.length_cells) occ.a[r.entry_slot] = 1.0;
  }
  validate_occupancy(t, occ);
  return occ;
}

/// Initial occupancy of `t` described by the config.
inline OccupancyVector initial_occupancy(const InitialSpec& s, const NetworkTopology& t) {
  if (!s.occupancy.empty()) return make_occupancy(t, s.occupancy);
  switch (s.layout) {
    case Layout::Random: return place_density(t, s.density, s.seed);
    case Layout::Clustered:
      return place_clustered(t, static_cast<int>(std::lround(s.density * t.counting_size())), s.seed);
    case Layout::Uniform: return place_uniform(t, s.density);
  }
  throw ConfigError("unknown layout");
}

}  // namespace netphase

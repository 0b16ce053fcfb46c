#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <sstream>

#include "netphase/config.hpp"
#include "netphase/output.hpp"

using namespace netphase;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "t.yaml");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"')
      quoted = !quoted;
    else if (c == ',' && !quoted) {
      out.push_back(cur);
      cur.clear();
    } else
      cur += c;
  }
  out.push_back(cur);
  return out;
}

}  // namespace

TEST_CASE("config round trip", "[config]") {
  RunConfig full;
  full.topologies = {TopologySpec{Family::TwoJunction, 0, 0, {20, 10, 10, 20}},
                     TopologySpec{Family::TorusCity, 0, 0, {}, 3, 5, 7, 2}};
  full.mode = Mode::Continuous;
  PolicySpec ol;
  ol.kind = PolicyKind::OpenLoop;
  ol.plan = {6, 4, {0, 3, -1}};
  PolicySpec gf;
  gf.kind = PolicyKind::GlobalFeedback;
  gf.q_scale = 0.1;
  gf.r_scale = 1.0 / 3;
  gf.lq_cycle = 6;
  gf.riccati_tol = 1e-9;
  gf.riccati_max_iter = 1234;
  PolicySpec lf;
  lf.kind = PolicyKind::LocalFeedback;
  full.policies = {ol, gf, lf};
  full.initial = {{}, 0.1 + 0.2, 99, Layout::Clustered};
  full.steps = 77;
  full.grid = {GridSpec::Kind::Linspace, 0.05, 0.95, 19, {}};
  full.K = 5000;
  full.burn_in = 1000;
  full.tolerance = 2e-4;
  full.seeds = 5;
  full.base_seed = 18446744073709551615ull;
  full.per_road = true;
  full.eps = 0.015;
  full.band = 0.3;
  full.threads = 2;
  full.out = "some dir/with: colon";

  RunConfig values;
  values.grid = {GridSpec::Kind::Values, 0, 1, 21, {0.0, 1.0 / 7, 0.5}};
  values.initial.occupancy = {0, 1, 0, 1, 0, 1, 0, 0, 1, 0};

  for (const auto& c : {RunConfig{}, full, values}) {
    const auto text = serialize_config(c);
    INFO(text);
    CHECK(parse_config(text) == c);
    CHECK(serialize_config(parse_config(text)) == text);
  }

  const std::filesystem::path dir = NETPHASE_SOURCE_DIR "/configs";
  int seen = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    INFO(entry.path());
    auto c = load_config(entry.path().string());
    CHECK(parse_config(serialize_config(c)) == c);
    ++seen;
  }
  CHECK(seen >= 8);
}

TEST_CASE("config diagnostics", "[config]") {
  CHECK(error_of("mode: sideways\n") == "t.yaml:1:7: key 'mode': expected continuous or discrete");
  CHECK(error_of("steps: 3\nsteeps: 4\n") == "t.yaml:2:1: key 'steeps': unknown key");
  CHECK(error_of("topology:\n  family: figure_eight\n  n: 5\n  m: x\n") ==
        "t.yaml:4:6: key 'topology.m': cannot read 'x'");
  CHECK(error_of("topology: {family: torus_city, rows: 1, cols: 4, segment_len: 9}\n").find("t.yaml:1:11:") == 0);
  CHECK(error_of("policy: {kind: open_loop, cycle: 4, green: 4}\n").find("green_first") != std::string::npos);
  CHECK(error_of("policy: {kind: priority, cycle: 4}\n").find("policy.cycle") != std::string::npos);
  CHECK(error_of("policies: [priority, teleport]\n").find("policies[1].kind") != std::string::npos);
  CHECK(error_of("grid: [0.2, 1.5]\n").find("t.yaml:1:13:") == 0);
  CHECK(error_of("initial: {occupancy: [0, 1]}\n").find("initial.occupancy") != std::string::npos);
  CHECK(error_of("mode: discrete\ninitial: {occupancy: [0, 0.5, 0, 0, 0, 0, 0, 0, 0, 0]}\n").find("0/1") !=
        std::string::npos);
  CHECK(error_of("estimate: {K: 100, burn_in: 100}\n").find("estimate.burn_in") != std::string::npos);
  CHECK(error_of("steps: [1\n").find("t.yaml:") == 0);
  CHECK(error_of("") == "");
  CHECK_THROWS_AS(load_config("/nonexistent/x.yaml"), ConfigError);
}

TEST_CASE("initial layouts", "[config]") {
  auto t = build_torus_city(4, 4, 9);
  InitialSpec s;
  s.density = 0.3;
  s.seed = 4;
  for (auto layout : {Layout::Random, Layout::Clustered}) {
    s.layout = layout;
    auto occ = initial_occupancy(s, t);
    CHECK(occ.cars() == std::lround(0.3 * t.counting_size()));
    CHECK(occ.a == initial_occupancy(s, t).a);
  }
  s.layout = Layout::Uniform;
  auto u = initial_occupancy(s, t);
  auto inv = road_inventories(t, u.a);
  for (const auto& r : t.roads())
    CHECK(std::abs(inv[r.id] / r.counting_positions() - 0.3) <= 0.5 / r.counting_positions());
  s.density = 1;
  CHECK(distance_to_uniform(initial_occupancy(s, t).a, t) == Catch::Approx(0.0).margin(1e-12));
  s.occupancy = std::vector<double>(t.slot_count(), 0.0);
  CHECK(initial_occupancy(s, t).cars() == 0);
}

TEST_CASE("text formats", "[config]") {
  CHECK(fraction(0.0) == "0");
  CHECK(fraction(3.0) == "3");
  CHECK(fraction(1.5) == "3/2");
  CHECK(fraction(-0.375) == "-3/8");
  CHECK(fraction(Dyadic::from_parts(5, 3)) == "5/8");
  CHECK(fraction(Rational(37, 59)) == "37/59");
  CHECK(format_number(0.1) == "0.1");
  CHECK(std::stod(format_number(1.0 / 3)) == 1.0 / 3);
  CHECK(csv_field("plain") == "plain");
  CHECK(csv_field("a,b") == "\"a,b\"");
  CHECK(csv_field("say \"x\"") == "\"say \"\"x\"\"\"");

  auto t = build_figure_eight(5, 5);
  std::vector<double> y{0, 1, 0, 1, 0, 1, 0, 0, 1, 0};
  CHECK(render_occupancy(t, y) == "nonpriority:0101 priority:1001 J:0");
  y[4] = 1;
  CHECK(render_occupancy(t, y).ends_with("J:W"));
  y[4] = 0;
  y[9] = 1;
  CHECK(render_occupancy(t, y).ends_with("J:S"));
}

TEST_CASE("diagram CSV phases agree on re-read", "[config]") {
  auto t = build_figure_eight(45, 15);
  SweepOptions opt;
  auto diag = sweep_diagram(t, full_density_grid(t), Mode::Discrete, {}, opt);
  std::stringstream ss;
  write_diagram_header(ss, false);
  write_diagram_rows(ss, diag, false);

  std::string line;
  std::getline(ss, line);
  CHECK(line == "topology_id,policy,r,density,flow,phase,converged,seed_count");
  std::vector<DiagramPoint> pts;
  std::vector<std::string> labels;
  while (std::getline(ss, line)) {
    auto f = split_csv(line);
    REQUIRE(f.size() == 8);
    CHECK(f[0] == t.id());
    DiagramPoint p;
    p.d = std::stod(f[3]);
    p.f = std::stod(f[4]);
    pts.push_back(p);
    labels.push_back(f[5]);
  }
  REQUIRE(pts.size() == diag.points.size());
  classify_phases_empirical(pts, opt.eps);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(pts[i].d == diag.points[i].d);
    CHECK(to_string(pts[i].phase) == labels[i]);
  }
}

TEST_CASE("analytic segments", "[config]") {
  auto segs = analytic_segments(phase_boundaries(45, 15));
  REQUIRE(segs.size() == 4);
  CHECK(segs[0].d_hi == Catch::Approx(15.0 / 59));
  CHECK(segs[1].d_hi == Catch::Approx(37.0 / 59));
  CHECK(segs[2].d_hi == Catch::Approx(45.0 / 59));
  CHECK(segs[3].d_hi == 1.0);
  auto small = analytic_segments(large_road_boundaries(Rational(1, 5)));
  REQUIRE(small.size() == 2);
  CHECK(small[0].phase == PhaseLabel::Free);
  CHECK(small[1].phase == PhaseLabel::Freeze);
  CHECK(small[1].d_lo == Catch::Approx(0.2));
}

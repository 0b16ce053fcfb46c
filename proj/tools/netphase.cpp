// netphase: simulate, sweep and analyse junction networks.
//
// Exit codes: 0 ok, 1 bad input, 2 Riccati iteration failed, 3 sweep did not
// converge under --strict.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "netphase/config.hpp"
#include "netphase/dyadic.hpp"
#include "netphase/metrics.hpp"
#include "netphase/output.hpp"

namespace fs = std::filesystem;
using namespace netphase;

namespace {

struct Overrides {
  std::string config;
  std::string out;
  int seeds = 0;
  bool strict = false;
  std::string mode;
  std::string policy;
};

RunConfig resolve(const Overrides& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_config(o.config);
  if (!o.out.empty()) c.out = o.out;
  if (o.seeds > 0) c.seeds = o.seeds;
  if (!o.mode.empty()) {
    if (o.mode == "continuous")
      c.mode = Mode::Continuous;
    else if (o.mode == "discrete")
      c.mode = Mode::Discrete;
    else
      throw ConfigError("--mode: expected continuous or discrete, got '" + o.mode + "'");
  }
  if (!o.policy.empty()) {
    auto k = parse_policy(o.policy);
    if (!k) throw ConfigError("--policy: unknown policy '" + o.policy + "'");
    PolicySpec p;
    p.kind = *k;
    c.policies = {p};
  }
  return c;
}

std::ofstream open_out(const RunConfig& c, const std::string& name) {
  fs::create_directories(c.out);
  const auto path = fs::path(c.out) / name;
  std::ofstream f(path);
  if (!f) throw ConfigError(path.string() + ": cannot write");
  return f;
}

template <class Scalar>
int run_simulation(const RunConfig& c, const NetworkTopology& t, const OccupancyVector& occ) {
  BasicSimulation<Scalar> sim(t, occ, c.mode);
  auto ctrl = make_controller(c.policies.front(), t, density(occ, t));
  const bool gated = ctrl->kind() != PolicyKind::Priority;

  std::vector<BasicCounterState<Scalar>> counters;
  std::vector<std::vector<Scalar>> ys;
  std::vector<std::string> frames;
  std::vector<double> yd;
  for (std::int64_t k = 0;; ++k) {
    std::vector<Scalar> y;
    sim.occupancy_into(y);
    yd.clear();
    for (const auto& v : y) yd.push_back(to_double(v));
    counters.push_back(sim.state());
    ys.push_back(std::move(y));
    frames.push_back(std::to_string(k) + "\t" + render_occupancy(t, yd));
    if (k == c.steps) break;
    sim.advance(gated ? ctrl->decide(k, yd) : std::span<const Approach>{});
  }
  auto fc = open_out(c, "counters.tsv");
  write_counters(fc, counters);
  auto fo = open_out(c, "occupancy.tsv");
  write_occupancies(fo, ys);
  auto fa = open_out(c, "animation.txt");
  for (const auto& f : frames) fa << f << "\n";
  std::cout << t.id() << " " << to_string(c.mode) << " " << c.steps << " steps, " << occ.cars() << " cars -> "
            << c.out << "\n";
  return 0;
}

int cmd_simulate(const RunConfig& c) {
  const auto t = build_topology(c.topologies.front());
  const auto occ = initial_occupancy(c.initial, t);
  validate_occupancy(t, occ, c.mode == Mode::Discrete);
  if (c.mode == Mode::Continuous) return run_simulation<Dyadic>(c, t, occ);
  return run_simulation<double>(c, t, occ);
}

SweepOptions sweep_options(const RunConfig& c) {
  SweepOptions o;
  o.seeds = c.seeds;
  o.base_seed = c.base_seed;
  o.threads = c.threads;
  o.eps = c.eps;
  o.estimate.K = c.K;
  o.estimate.burn_in = c.burn_in;
  o.estimate.tolerance = c.tolerance;
  o.estimate.per_road = c.per_road;
  return o;
}

std::vector<FundamentalDiagram> run_sweeps(const RunConfig& c) {
  std::vector<FundamentalDiagram> diags;
  const auto opt = sweep_options(c);
  for (const auto& spec : c.topologies) {
    const auto t = build_topology(spec);
    for (const auto& p : c.policies) {
      diags.push_back(sweep_diagram(t, c.grid.densities(t), c.mode, p, opt));
      std::cerr << "swept " << t.id() << " " << to_string(p.kind) << "\n";
    }
  }
  return diags;
}

int report_convergence(const std::vector<FundamentalDiagram>& diags, bool strict) {
  int bad = 0;
  for (const auto& d : diags)
    for (const auto& p : d.points)
      if (!p.converged) {
        ++bad;
        std::cerr << "warning: " << d.topology_id << " " << d.policy << " d=" << format_number(p.d)
                  << " did not converge\n";
      }
  return bad > 0 && strict ? 3 : 0;
}

int cmd_diagram(const RunConfig& c, bool strict) {
  const auto diags = run_sweeps(c);
  auto f = open_out(c, "diagram.csv");
  write_diagram_header(f, false);
  for (const auto& d : diags) write_diagram_rows(f, d, false);
  if (c.per_road) {
    auto fr = open_out(c, "diagram_roads.csv");
    write_diagram_header(fr, true);
    for (const auto& d : diags) write_diagram_rows(fr, d, true);
  }
  auto fp = open_out(c, "diagram.dat");
  write_plot_data(fp, diags);
  auto fs = open_out(c, "diagram.svg");
  write_svg(fs, diags);
  std::cout << diags.size() << " series -> " << c.out << "\n";
  return report_convergence(diags, strict);
}

int cmd_phases(const RunConfig& c, bool strict) {
  const auto diags = run_sweeps(c);
  auto f = open_out(c, "phases.csv");
  write_segments_header(f);
  std::size_t i = 0;
  for (const auto& spec : c.topologies) {
    const auto t = build_topology(spec);
    const auto b = spec.family == Family::FigureEight ? phase_boundaries(spec.n, spec.m)
                                                      : large_road_boundaries(t.ratio_r());
    std::cout << t.id() << " d1=" << fraction(b.d1) << " d2=" << fraction(b.d2) << " r=" << fraction(b.r) << "\n";
    for (const auto& p : c.policies) {
      if (p.kind == PolicyKind::Priority) write_segments(f, t.id(), to_string(p.kind), "analytic", analytic_segments(b));
      const auto& d = diags[i++];
      write_segments(f, d.topology_id, d.policy, "empirical", d.segments);
      for (const auto& s : d.segments)
        std::cout << "  " << d.policy << " " << to_string(s.phase) << " [" << format_number(s.d_lo) << ", "
                  << format_number(s.d_hi) << "]\n";
    }
  }
  return report_convergence(diags, strict);
}

int cmd_eigen(const RunConfig& c, int n, int m, int capacity, int points) {
  auto f = open_out(c, "eigen.csv");
  write_eigen_table(f, n, m, capacity, points);
  std::cout << "eigen n=" << n << " m=" << m << " capacity=" << capacity << " -> " << c.out << "\n";
  return 0;
}

int cmd_response(const RunConfig& c) {
  const auto t = build_topology(c.topologies.front());
  auto fs = open_out(c, "response_summary.csv");
  fs << "policy,seed,response_time,settled,plateau\n";
  for (int s = 0; s < c.seeds; ++s) {
    InitialSpec init = c.initial;
    init.seed += static_cast<std::uint64_t>(s);
    const auto occ = initial_occupancy(init, t);
    for (const auto& p : c.policies) {
      const auto tr = response_trace(t, occ, p, c.steps);
      const auto rt = response_time(tr.distance, c.band);
      auto ft = open_out(c, "response_" + tr.policy + "_seed" + std::to_string(init.seed) + ".csv");
      write_trace(ft, tr.distance);
      fs << tr.policy << "," << init.seed << "," << rt.steps << "," << (rt.settled ? "true" : "false") << ","
         << format_number(rt.plateau) << "\n";
      std::cout << tr.policy << " seed " << init.seed << ": response_time " << rt.steps
                << (rt.settled ? "" : " (not settled)") << ", plateau " << format_number(rt.plateau) << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Junction network traffic: simulation, fundamental diagrams, phases and light control"};
  app.require_subcommand(1);
  Overrides o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "YAML run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--seeds", o.seeds, "seeds per density point")->check(CLI::PositiveNumber);
    sub->add_flag("--strict", o.strict, "exit 3 when a sweep point does not converge");
    sub->add_option("--mode", o.mode, "continuous or discrete");
    sub->add_option("--policy", o.policy, "priority, open_loop, local_feedback or global_feedback");
  };
  auto* sim = app.add_subcommand("simulate", "counter and occupancy trajectories");
  auto* dia = app.add_subcommand("diagram", "fundamental diagram sweep");
  auto* eig = app.add_subcommand("eigen", "analytic eigenvalue curve of the figure-eight");
  auto* pha = app.add_subcommand("phases", "analytic and empirical phase segments");
  auto* rsp = app.add_subcommand("response", "distance to the uniform distribution over time");
  for (auto* s : {sim, dia, eig, pha, rsp}) add_common(s);
  int n = 45, m = 15, capacity = 1, points = 236;
  eig->add_option("-n,--n", n, "non-priority road size");
  eig->add_option("-m,--m", m, "priority road size");
  eig->add_option("--capacity", capacity, "junction capacity (1 or 2)");
  eig->add_option("--points", points, "grid i/points, i = 0..points")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const RunConfig c = resolve(o);
    if (*sim) return cmd_simulate(c);
    if (*dia) return cmd_diagram(c, o.strict);
    if (*eig) return cmd_eigen(c, n, m, capacity, points);
    if (*pha) return cmd_phases(c, o.strict);
    if (*rsp) return cmd_response(c);
  } catch (const RiccatiError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

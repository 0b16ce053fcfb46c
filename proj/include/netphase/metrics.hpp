#pragma once

// Flow estimation, periodic-regime detection, density sweeps, empirical
// phase labels and response times.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "netphase/analytic.hpp"
#include "netphase/control.hpp"
#include "netphase/dynamics.hpp"

namespace netphase {

struct Period {
  std::int64_t period = 0;
  std::int64_t start = 0;
};

/// Remembers every state key seen and reports the first repeat.
class PeriodDetector {
 public:
  std::optional<Period> observe(std::int64_t k, const std::string& key) {
    auto [it, inserted] = seen_.try_emplace(key, k);
    if (inserted) return std::nullopt;
    return Period{k - it->second, it->second};
  }
  void clear() { seen_.clear(); }

 private:
  std::unordered_map<std::string, std::int64_t> seen_;
};

/// Smallest period and earliest start in a sequence of state keys.
inline std::optional<Period> detect_period(const std::vector<std::string>& keys) {
  PeriodDetector det;
  for (std::size_t k = 0; k < keys.size(); ++k)
    if (auto p = det.observe(static_cast<std::int64_t>(k), keys[k])) return p;
  return std::nullopt;
}

/// Occupancies, junction parities and controller state of a discrete run.
inline std::string state_key(const Simulation& sim, std::span<const double> y,
                             const Controller* ctrl = nullptr) {
  std::string key;
  key.reserve(y.size() + sim.topology().junctions().size() + 8);
  for (double v : y) key += static_cast<char>(static_cast<int>(v));
  for (std::size_t j = 0; j < sim.topology().junctions().size(); ++j)
    key += sim.junction_parity(j) ? '1' : '0';
  if (ctrl) ctrl->append_state_key(sim.state().k, key);
  return key;
}

struct EstimateOptions {
  std::int64_t K = 0;         // 0: 50 x counting size
  std::int64_t burn_in = -1;  // negative: K / 2
  bool detect_period = true;  // discrete mode only
  bool per_road = false;
  double tolerance = 1e-3;
};

struct GrowthEstimate {
  double f = 0;
  bool converged = false;
  std::optional<Period> period;
  std::int64_t steps = 0;  // steps actually simulated
  std::int64_t K = 0;
  std::int64_t burn_in = 0;
  std::vector<double> road_density;  // by road id, time-averaged
  std::vector<double> road_flow;
};

/// Average counter growth per step. Stops early once a discrete run repeats a
/// state, in which case the flow is the exact per-period average.
inline GrowthEstimate estimate_growth_rate(const NetworkTopology& t, const OccupancyVector& occ, Mode mode,
                                           const PolicySpec& policy = {}, EstimateOptions opt = {}) {
  GrowthEstimate g;
  g.K = opt.K > 0 ? opt.K : 50 * static_cast<std::int64_t>(t.counting_size());
  g.burn_in = opt.burn_in >= 0 ? opt.burn_in : g.K / 2;
  if (!(g.K > g.burn_in)) throw DynamicsError("horizon must exceed burn-in");

  const double d = density(occ, t);
  auto ctrl = make_controller(policy, t, d);
  Simulation sim(t, occ, mode);
  const bool gated = ctrl->kind() != PolicyKind::Priority;
  const bool periodic = opt.detect_period && mode == Mode::Discrete;
  const double slots = static_cast<double>(t.slot_count());
  const std::size_t nroads = t.roads().size();

  std::vector<double> y;
  std::vector<double> mean_x;
  mean_x.reserve(static_cast<std::size_t>(g.K + 1));
  // Per-road running sums for the averaging window, indexed by step.
  std::vector<std::vector<double>> road_x;      // cumulative road counters
  std::vector<std::vector<double>> road_cars;   // prefix sums of inventories
  auto mean_of = [&](const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s / slots;
  };
  auto record_roads = [&] {
    if (!opt.per_road) return;
    std::vector<double> rx(nroads, 0.0), rc(nroads, 0.0);
    const auto& x = sim.state().x;
    for (const auto& r : t.roads()) {
      for (std::size_t i = r.first_slot; i <= r.entry_slot; ++i) rx[r.id] += x[i];
      rx[r.id] /= static_cast<double>(r.entry_slot - r.first_slot + 1);
    }
    auto inv = road_inventories(t, y);
    for (std::size_t i = 0; i < nroads; ++i)
      rc[i] = inv[static_cast<Eigen::Index>(i)] + (road_cars.empty() ? 0.0 : road_cars.back()[i]);
    road_x.push_back(std::move(rx));
    road_cars.push_back(std::move(rc));
  };

  PeriodDetector det;
  sim.occupancy_into(y);
  mean_x.push_back(mean_of(sim.state().x));
  record_roads();
  if (periodic) det.observe(0, state_key(sim, y, ctrl.get()));

  std::int64_t end = g.K, begin = g.burn_in;
  for (std::int64_t k = 0; k < g.K; ++k) {
    sim.advance(gated ? ctrl->decide(k, y) : std::span<const Approach>{});
    sim.occupancy_into(y);
    mean_x.push_back(mean_of(sim.state().x));
    record_roads();
    if (periodic) {
      if (auto p = det.observe(k + 1, state_key(sim, y, ctrl.get()))) {
        g.period = p;
        begin = p->start;
        end = k + 1;
        break;
      }
    }
  }
  g.steps = static_cast<std::int64_t>(mean_x.size()) - 1;

  auto rate = [&](std::int64_t a, std::int64_t b) {
    return (mean_x[static_cast<std::size_t>(b)] - mean_x[static_cast<std::size_t>(a)]) /
           static_cast<double>(b - a);
  };
  g.f = rate(begin, end);
  if (g.period) {
    g.converged = true;
  } else {
    const std::int64_t mid = (g.K + g.burn_in) / 2;
    g.converged = mid > g.burn_in && std::abs(rate(g.burn_in, mid) - g.f) < opt.tolerance;
  }

  if (opt.per_road) {
    g.road_density.assign(nroads, 0.0);
    g.road_flow.assign(nroads, 0.0);
    const auto b = static_cast<std::size_t>(begin), e = static_cast<std::size_t>(end);
    for (const auto& r : t.roads()) {
      const auto i = static_cast<std::size_t>(r.id);
      g.road_flow[i] = (road_x[e][i] - road_x[b][i]) / static_cast<double>(e - b);
      // Inventories at steps b+1..e (one full period when periodic).
      const double cars = road_cars[e][i] - road_cars[b][i];
      g.road_density[i] = cars / static_cast<double>(e - b) / r.counting_positions();
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Fundamental diagrams.

struct DiagramPoint {
  double d = 0;  // realized density (cars / counting size)
  double f = 0;
  bool converged = false;
  int seed_count = 0;
  std::uint64_t seed = 0;  // representative run (median flow)
  PhaseLabel phase = PhaseLabel::Free;
  std::vector<double> road_density;
  std::vector<double> road_flow;
};

struct PhaseSegment {
  PhaseLabel phase;
  double d_lo;
  double d_hi;
};

struct FundamentalDiagram {
  std::string topology_id;
  double r = 0;
  std::string policy;
  std::vector<DiagramPoint> points;
  std::vector<PhaseSegment> segments;
};

struct SweepOptions {
  int seeds = 3;
  std::uint64_t base_seed = 1;
  EstimateOptions estimate;
  unsigned threads = 0;  // 0: hardware concurrency
  double eps = 0.02;
};

/// Labels each point and merges runs of equal labels into segments covering
/// [first d, last d].
inline std::vector<PhaseSegment> classify_phases_empirical(std::vector<DiagramPoint>& pts, double eps = 0.02) {
  std::vector<PhaseSegment> segs;
  if (pts.empty()) return segs;
  double max_flow = 0;
  for (const auto& p : pts) max_flow = std::max(max_flow, p.f);
  for (auto& p : pts) {
    if (std::abs(p.f - p.d) <= eps)
      p.phase = PhaseLabel::Free;
    else if (p.f <= eps)
      p.phase = PhaseLabel::Freeze;
    else if (std::abs(p.f - max_flow) <= eps)
      p.phase = PhaseLabel::Saturation;
    else
      p.phase = PhaseLabel::Recession;
  }
  for (const auto& p : pts) {
    if (segs.empty() || segs.back().phase != p.phase) {
      if (!segs.empty()) segs.back().d_hi = p.d;
      segs.push_back({p.phase, p.d, p.d});
    }
  }
  segs.back().d_hi = pts.back().d;
  return segs;
}

inline std::vector<PhaseSegment> classify_phases_empirical(FundamentalDiagram& diag, double eps = 0.02) {
  diag.segments = classify_phases_empirical(diag.points, eps);
  return diag.segments;
}

/// Exact phase segments of [0, 1] for the given boundaries.
inline std::vector<PhaseSegment> analytic_segments(const PhaseBoundaries& b) {
  auto label = [&](const Rational& d) {
    if (!(d < b.r)) return PhaseLabel::Freeze;
    if (d < b.d1) return PhaseLabel::Free;
    if (d < b.d2) return PhaseLabel::Saturation;
    return PhaseLabel::Recession;
  };
  std::vector<Rational> cuts{Rational(0)};
  for (const auto& c : {b.d1, b.d2, b.r})
    if (c > Rational(0) && c < Rational(1)) cuts.push_back(c);
  std::sort(cuts.begin(), cuts.end());
  std::vector<PhaseSegment> segs;
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    const auto ph = label(cuts[i]);
    const double lo = boost::rational_cast<double>(cuts[i]);
    const double hi = i + 1 < cuts.size() ? boost::rational_cast<double>(cuts[i + 1]) : 1.0;
    if (!segs.empty() && segs.back().phase == ph)
      segs.back().d_hi = hi;
    else if (segs.empty() || lo < hi)
      segs.push_back({ph, lo, hi});
  }
  return segs;
}

/// Large-road boundaries for a network with non-priority ratio r.
inline PhaseBoundaries large_road_boundaries(const Rational& r) {
  return {Rational(1, 4), (2 * r + 1) / 4, r, Rational(0)};
}

/// Runs `jobs` independent tasks on a bounded pool of threads.
template <class Fn>
void parallel_for(std::size_t jobs, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, jobs));
  if (threads <= 1) {
    for (std::size_t i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < jobs;) {
        if (failed) return;
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

/// Seed used for run s of grid point i.
inline std::uint64_t sweep_seed(std::uint64_t base, std::size_t point, int s) {
  return base + 1000003ull * point + static_cast<std::uint64_t>(s);
}

inline FundamentalDiagram sweep_diagram(const NetworkTopology& t, const std::vector<double>& grid, Mode mode,
                                        const PolicySpec& policy = {}, const SweepOptions& opt = {}) {
  if (opt.seeds < 1) throw DynamicsError("need at least one seed per point");
  for (double d : grid)
    if (!(d >= 0.0 && d <= 1.0)) throw DynamicsError("density grid outside [0,1]");
  FundamentalDiagram diag;
  diag.topology_id = t.id();
  diag.r = boost::rational_cast<double>(t.ratio_r());
  diag.policy = to_string(policy.kind);

  const std::size_t runs = grid.size() * static_cast<std::size_t>(opt.seeds);
  std::vector<GrowthEstimate> est(runs);
  parallel_for(runs, opt.threads, [&](std::size_t job) {
    const std::size_t i = job / static_cast<std::size_t>(opt.seeds);
    const int s = static_cast<int>(job % static_cast<std::size_t>(opt.seeds));
    auto occ = place_density(t, grid[i], sweep_seed(opt.base_seed, i, s));
    est[job] = estimate_growth_rate(t, occ, mode, policy, opt.estimate);
  });

  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::size_t> order(static_cast<std::size_t>(opt.seeds));
    for (std::size_t s = 0; s < order.size(); ++s) order[s] = i * order.size() + s;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return est[a].f < est[b].f; });
    const std::size_t mid = order.size() / 2;
    DiagramPoint p;
    p.d = std::lround(grid[i] * t.counting_size()) / static_cast<double>(t.counting_size());
    p.f = order.size() % 2 ? est[order[mid]].f : 0.5 * (est[order[mid - 1]].f + est[order[mid]].f);
    p.seed_count = opt.seeds;
    p.converged = std::all_of(order.begin(), order.end(), [&](std::size_t j) { return est[j].converged; });
    const std::size_t rep = order[order.size() % 2 ? mid : mid - 1];
    p.seed = sweep_seed(opt.base_seed, i, static_cast<int>(rep % order.size()));
    p.road_density = est[rep].road_density;
    p.road_flow = est[rep].road_flow;
    diag.points.push_back(std::move(p));
  }
  std::stable_sort(diag.points.begin(), diag.points.end(),
                   [](const DiagramPoint& a, const DiagramPoint& b) { return a.d < b.d; });
  classify_phases_empirical(diag, opt.eps);
  return diag;
}

/// Grid {N / counting_size : N = 0..counting_size}.
inline std::vector<double> full_density_grid(const NetworkTopology& t) {
  std::vector<double> g;
  for (int N = 0; N <= t.counting_size(); ++N) g.push_back(static_cast<double>(N) / t.counting_size());
  return g;
}

// ---------------------------------------------------------------------------
// Distribution of cars over roads.

/// Euclidean distance between per-road densities and the global density.
inline double distance_to_uniform(std::span<const double> y, const NetworkTopology& t) {
  if (y.size() != t.slot_count()) throw DynamicsError("occupancy has wrong size");
  auto inv = road_inventories(t, y);
  const double d = inv.sum() / t.counting_size();
  double s = 0;
  for (const auto& r : t.roads()) {
    const double e = inv[r.id] / r.counting_positions() - d;
    s += e * e;
  }
  return std::sqrt(s);
}

struct ResponseTrace {
  std::string policy;
  std::vector<double> distance;  // step 0..K
};

struct ResponseTime {
  std::int64_t steps = 0;
  bool settled = true;
  double plateau = 0;
};

/// First index after which the trace stays within `band` of its plateau
/// (mean of the last 10%).
inline ResponseTime response_time(std::span<const double> trace, double band) {
  if (trace.empty()) throw DynamicsError("empty trace");
  if (!(band >= 0)) throw DynamicsError("band must be >= 0");
  const std::size_t tail = std::max<std::size_t>(1, trace.size() / 10);
  ResponseTime rt;
  for (std::size_t i = trace.size() - tail; i < trace.size(); ++i) rt.plateau += trace[i];
  rt.plateau /= static_cast<double>(tail);
  std::size_t first = trace.size();
  while (first > 0 && std::abs(trace[first - 1] - rt.plateau) <= band) --first;
  rt.steps = static_cast<std::int64_t>(first);
  rt.settled = first < trace.size();
  return rt;
}

/// Fills whole roads in road order starting at a seeded road, the last one
/// partially from its start. No cars are put inside junctions.
inline OccupancyVector place_clustered(const NetworkTopology& t, int cars, std::uint64_t seed) {
  int cells = 0;
  for (const auto& r : t.roads()) cells += r.length_cells;
  if (cars < 0 || cars > cells) throw DynamicsError("too many cars for a clustered start");
  std::mt19937_64 rng(seed);
  const std::size_t nroads = t.roads().size();
  std::size_t road = static_cast<std::size_t>(rng() % nroads);
  OccupancyVector occ{std::vector<double>(t.slot_count(), 0.0)};
  while (cars > 0) {
    const auto& r = t.roads()[road];
    for (std::size_t i = r.first_slot; i < r.entry_slot && cars > 0; ++i, --cars) occ.a[i] = 1.0;
    road = (road + 1) % nroads;
  }
  return occ;
}

/// Distance to the uniform distribution at every step of a discrete run.
inline ResponseTrace response_trace(const NetworkTopology& t, const OccupancyVector& occ, const PolicySpec& policy,
                                    std::int64_t K) {
  if (K < 1) throw DynamicsError("horizon must be >= 1");
  auto ctrl = make_controller(policy, t, density(occ, t));
  Simulation sim(t, occ, Mode::Discrete);
  const bool gated = ctrl->kind() != PolicyKind::Priority;
  ResponseTrace tr;
  tr.policy = to_string(policy.kind);
  tr.distance.reserve(static_cast<std::size_t>(K + 1));
  std::vector<double> y;
  sim.occupancy_into(y);
  tr.distance.push_back(distance_to_uniform(y, t));
  for (std::int64_t k = 0; k < K; ++k) {
    sim.advance(gated ? ctrl->decide(k, y) : std::span<const Approach>{});
    sim.occupancy_into(y);
    tr.distance.push_back(distance_to_uniform(y, t));
  }
  return tr;
}

}  // namespace netphase

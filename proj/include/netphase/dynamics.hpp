#pragma once

// Cumulative-counter traffic dynamics.
//
// x[i] counts the cars that have entered slot i since time 0. A road cell
// takes a car when its predecessor holds one and it is itself free:
//
//   x_i(k+1) = min(a_{i-1} + x_{i-1}(k), 1 - a_i + x_{i+1}(k))
//
// Junction entries share the free places of the junction; under the priority
// rule the priority entry is served first and the non-priority entry uses
// what is left after the priority entry of the same step. Junction exits
// split the cumulative inflow in halves (exactly in continuous mode; odd cars
// to output 1 and even cars to output 0 in discrete mode).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "netphase/topology.hpp"

namespace netphase {

class DynamicsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Mode : std::uint8_t { Continuous, Discrete };

inline const char* to_string(Mode m) { return m == Mode::Continuous ? "continuous" : "discrete"; }

/// Which incoming road of a light-controlled junction holds the green.
/// Major is the road carrying the priority label in the topology.
enum class Approach : std::uint8_t { Major, Minor };

/// Initial car placement, indexed like the counter slots.
struct OccupancyVector {
  std::vector<double> a;

  double cars() const {
    double s = 0;
    for (double v : a) s += v;
    return s;
  }
};

template <class Scalar>
struct BasicCounterState {
  std::int64_t k = 0;
  std::vector<Scalar> x;
  Mode mode = Mode::Continuous;
};
using CounterState = BasicCounterState<double>;

/// Per-slot occupancy. Junction slots hold the cars heading to each output.
template <class Scalar>
struct BasicOccupancyState {
  std::vector<Scalar> y;
};
using OccupancyState = BasicOccupancyState<double>;

inline double half_of(double v) { return v * 0.5; }
inline double to_double(double v) { return v; }

/// Throws if `a` violates the placement constraints of `t`.
inline void validate_occupancy(const NetworkTopology& t, const OccupancyVector& occ,
                               bool require_integral = false) {
  if (occ.a.size() != t.slot_count())
    throw DynamicsError("occupancy has " + std::to_string(occ.a.size()) + " entries, expected " +
                        std::to_string(t.slot_count()));
  for (std::size_t i = 0; i < occ.a.size(); ++i) {
    const double v = occ.a[i];
    if (!(v >= 0.0 && v <= 1.0))
      throw DynamicsError("occupancy a[" + std::to_string(i) + "] outside [0,1]");
    if (require_integral && v != std::floor(v))
      throw DynamicsError("discrete mode needs 0/1 occupancies (a[" + std::to_string(i) + "])");
  }
  for (const auto& j : t.junctions()) {
    double s = occ.a[t.junction_slot(j.id, 0)] + occ.a[t.junction_slot(j.id, 1)];
    if (s > j.capacity)
      throw DynamicsError("junction " + std::to_string(j.id) + " holds more cars than its capacity");
  }
}

inline OccupancyVector make_occupancy(const NetworkTopology& t, std::vector<double> a) {
  OccupancyVector occ{std::move(a)};
  validate_occupancy(t, occ);
  return occ;
}

/// Places `cars` vehicles on distinct counting positions drawn uniformly
/// with the given seed. A junction receives at most one car; its direction
/// slot is drawn from the same generator.
inline OccupancyVector place_cars(const NetworkTopology& t, int cars, std::uint64_t seed) {
  const int positions = t.counting_size();
  if (cars < 0 || cars > positions)
    throw DynamicsError("cannot place " + std::to_string(cars) + " cars on " +
                        std::to_string(positions) + " positions");
  // Position p < cells maps to a road cell; the remaining ones are junctions.
  std::vector<std::size_t> cell_slots;
  for (std::size_t i = 0; i < t.slot_count(); ++i)
    if (t.slots()[i].kind == SlotKind::RoadCell) cell_slots.push_back(i);

  std::vector<int> order(positions);
  for (int i = 0; i < positions; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  OccupancyVector occ{std::vector<double>(t.slot_count(), 0.0)};
  for (int c = 0; c < cars; ++c) {
    const auto p = static_cast<std::size_t>(order[c]);
    if (p < cell_slots.size()) {
      occ.a[cell_slots[p]] = 1.0;
    } else {
      const int j = static_cast<int>(p - cell_slots.size());
      occ.a[t.junction_slot(j, static_cast<int>(rng() & 1u))] = 1.0;
    }
  }
  return occ;
}

/// Car count round(d * counting_size) placed as in place_cars.
inline OccupancyVector place_density(const NetworkTopology& t, double d, std::uint64_t seed) {
  if (!(d >= 0.0 && d <= 1.0)) throw DynamicsError("density outside [0,1]");
  return place_cars(t, static_cast<int>(std::lround(d * t.counting_size())), seed);
}

inline double density(const OccupancyVector& occ, const NetworkTopology& t) {
  return occ.cars() / t.counting_size();
}

namespace detail {

struct SlotRule {
  enum Kind : std::uint8_t { Cell, FirstCell, Entry } kind = Cell;
  // FirstCell: junction entry slots feeding this road and the slot holding
  // initial cars headed here.
  std::uint32_t j0 = 0, j1 = 0, dir = 0;
  bool ceil_share = false;
};

struct JunctionRule {
  std::uint32_t s0, s1;  // non-priority and priority entry
  std::uint32_t f0, f1;  // first cells of out_roads[0] / out_roads[1]
  int capacity;
};

}  // namespace detail

/// Steps one network from x(0) = given counters. Holds a pointer to the
/// topology, which must outlive it. `Scalar` is double for speed or an exact
/// type such as Dyadic.
template <class Scalar>
class BasicSimulation {
 public:
  using State = BasicCounterState<Scalar>;

  BasicSimulation(const NetworkTopology& t, OccupancyVector occ, Mode mode,
                  std::vector<Scalar> x0 = {})
      : topo_(&t), occ_(std::move(occ)) {
    validate_occupancy(t, occ_, mode == Mode::Discrete);
    for (double v : occ_.a) a_.push_back(Scalar(v));
    state_.mode = mode;
    state_.x = x0.empty() ? std::vector<Scalar>(t.slot_count(), Scalar(0)) : std::move(x0);
    if (state_.x.size() != t.slot_count()) throw DynamicsError("counter vector has wrong size");
    if (mode == Mode::Discrete) {
      using std::floor;
      for (const auto& v : state_.x)
        if (v != floor(v)) throw DynamicsError("discrete counters must be integers");
    }
    next_.resize(state_.x.size());

    rules_.resize(t.slot_count());
    for (const auto& r : t.roads()) {
      for (std::size_t s = r.first_slot; s < r.entry_slot; ++s) rules_[s].kind = detail::SlotRule::Cell;
      rules_[r.entry_slot].kind = detail::SlotRule::Entry;
      const auto& src = t.junctions()[r.from_junction];
      auto& first = rules_[r.first_slot];
      first.kind = detail::SlotRule::FirstCell;
      first.j0 = static_cast<std::uint32_t>(t.junction_slot(src.id, 0));
      first.j1 = static_cast<std::uint32_t>(t.junction_slot(src.id, 1));
      const int out = src.out_roads[0] == r.id ? 0 : 1;
      first.ceil_share = out == 1;
      first.dir = out == 1 ? first.j1 : first.j0;
    }
    for (const auto& j : t.junctions()) {
      junctions_.push_back({static_cast<std::uint32_t>(t.junction_slot(j.id, 0)),
                            static_cast<std::uint32_t>(t.junction_slot(j.id, 1)),
                            static_cast<std::uint32_t>(t.roads()[j.out_roads[0]].first_slot),
                            static_cast<std::uint32_t>(t.roads()[j.out_roads[1]].first_slot),
                            j.capacity});
    }
  }

  const NetworkTopology& topology() const { return *topo_; }
  const OccupancyVector& occupancy_vector() const { return occ_; }
  const State& state() const { return state_; }
  Mode mode() const { return state_.mode; }

  /// One synchronous update. An empty gate applies the priority rule;
  /// otherwise gate[j] names the approach holding the green at junction j.
  void advance(std::span<const Approach> gate = {}) {
    if (!gate.empty() && gate.size() != junctions_.size())
      throw DynamicsError("gate has " + std::to_string(gate.size()) + " entries for " +
                          std::to_string(junctions_.size()) + " junctions");
    const auto& x = state_.x;
    const auto& a = a_;
    const Scalar one(1);
    const bool discrete = state_.mode == Mode::Discrete;
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = rules_[i];
      if (r.kind == detail::SlotRule::Cell) {
        next_[i] = std::min(a[i - 1] + x[i - 1], one - a[i] + x[i + 1]);
      } else if (r.kind == detail::SlotRule::FirstCell) {
        next_[i] = std::min(a[r.dir] + split(x[r.j0] + x[r.j1], r.ceil_share, discrete),
                            one - a[i] + x[i + 1]);
      }
    }
    for (std::size_t j = 0; j < junctions_.size(); ++j) {
      const auto& J = junctions_[j];
      const Scalar free_places = Scalar(J.capacity) - a[J.s0] - a[J.s1] + x[J.f0] + x[J.f1];
      const Scalar supply0 = a[J.s0 - 1] + x[J.s0 - 1];
      const Scalar supply1 = a[J.s1 - 1] + x[J.s1 - 1];
      if (gate.empty()) {
        next_[J.s1] = std::min(supply1, free_places - x[J.s0]);
        next_[J.s0] = std::min(supply0, free_places - next_[J.s1]);
      } else {
        const bool major = gate[j] == Approach::Major;
        next_[J.s1] = std::min({supply1, free_places - x[J.s0], major ? x[J.s1] + one : x[J.s1]});
        next_[J.s0] = std::min({supply0, free_places - x[J.s1], major ? x[J.s0] : x[J.s0] + one});
      }
    }
    state_.x.swap(next_);
    ++state_.k;
  }

  /// Occupancy of every slot at the current time. In continuous mode the
  /// values may be fractional.
  BasicOccupancyState<Scalar> occupancy() const {
    BasicOccupancyState<Scalar> o;
    occupancy_into(o.y);
    return o;
  }

  void occupancy_into(std::vector<Scalar>& y) const {
    const auto& x = state_.x;
    const auto& a = a_;
    const bool discrete = state_.mode == Mode::Discrete;
    y.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
      if (rules_[i].kind != detail::SlotRule::Entry) y[i] = a[i] + x[i] - x[i + 1];
    for (const auto& J : junctions_) {
      const Scalar total = x[J.s0] + x[J.s1];
      y[J.s1] = a[J.s1] + split(total, true, discrete) - x[J.f1];
      y[J.s0] = a[J.s0] + split(total, false, discrete) - x[J.f0];
    }
  }

  /// Parity of total cumulative entries at each junction (discrete mode).
  bool junction_parity(std::size_t j) const {
    const auto& J = junctions_[j];
    const auto total = static_cast<std::int64_t>(to_double(state_.x[J.s0] + state_.x[J.s1]));
    return (total & 1) != 0;
  }

 private:
  static Scalar split(const Scalar& total, bool up, bool discrete) {
    using std::ceil;
    using std::floor;
    Scalar h = half_of(total);
    if (!discrete) return h;
    return up ? ceil(h) : floor(h);
  }

  const NetworkTopology* topo_;
  OccupancyVector occ_;
  std::vector<Scalar> a_;
  State state_;
  std::vector<Scalar> next_;
  std::vector<detail::SlotRule> rules_;
  std::vector<detail::JunctionRule> junctions_;
};

using Simulation = BasicSimulation<double>;

/// One update of `x` without keeping a simulation around.
template <class Scalar>
BasicCounterState<Scalar> step(const BasicCounterState<Scalar>& x, const OccupancyVector& occ,
                               const NetworkTopology& t, std::span<const Approach> gate = {}) {
  if (x.x.size() != t.slot_count()) throw DynamicsError("counter vector has wrong size");
  BasicSimulation<Scalar> sim(t, occ, x.mode, x.x);
  sim.advance(gate);
  BasicCounterState<Scalar> out = sim.state();
  out.k = x.k + 1;
  return out;
}

inline CounterState step(const CounterState& x, const OccupancyVector& occ,
                         const NetworkTopology& t, std::span<const Approach> gate = {}) {
  return step<double>(x, occ, t, gate);
}

/// Gate source applying the priority rule at every junction.
struct PriorityGate {
  template <class Sim>
  std::span<const Approach> operator()(std::int64_t, const Sim&) {
    return {};
  }
};

/// Runs K steps from x(0) = 0 and returns x(0), x(stride), ..., x(K).
/// `gates(k, sim)` supplies the light assignment used for step k -> k+1.
template <class Scalar = double, class GateSource = PriorityGate>
std::vector<BasicCounterState<Scalar>> simulate(const NetworkTopology& t, const OccupancyVector& occ,
                                                Mode mode, std::int64_t K, GateSource gates = {},
                                                std::int64_t stride = 1) {
  if (K < 1) throw DynamicsError("horizon must be >= 1");
  if (stride < 1) throw DynamicsError("stride must be >= 1");
  BasicSimulation<Scalar> sim(t, occ, mode);
  std::vector<BasicCounterState<Scalar>> out;
  out.reserve(static_cast<std::size_t>(K / stride + 2));
  out.push_back(sim.state());
  for (std::int64_t k = 0; k < K; ++k) {
    sim.advance(gates(k, sim));
    if (sim.state().k % stride == 0 || sim.state().k == K) out.push_back(sim.state());
  }
  return out;
}

/// Cell occupancies reconstructed from discrete counters. Continuous states
/// are rejected unless `diagnostic` is set.
template <class Scalar>
BasicOccupancyState<Scalar> occupancy_at(const BasicCounterState<Scalar>& x,
                                         const OccupancyVector& occ, const NetworkTopology& t,
                                         bool diagnostic = false) {
  if (x.mode == Mode::Continuous && !diagnostic)
    throw DynamicsError("occupancies are only defined for discrete-mode counters");
  BasicSimulation<Scalar> sim(t, occ, x.mode, x.x);
  return sim.occupancy();
}

}  // namespace netphase

#pragma once

// Closed road networks cut into unit cells: the figure-eight (one junction),
// two circular roads crossing twice, and a regular city wrapped on a torus.
//
// Counter slot layout. Every road contributes a contiguous block of slots:
// its pure road cells in driving order, followed by the entry counter of the
// junction it feeds. A junction therefore owns two slots (one per incoming
// road). Slot 0 of a junction is the entry fed by its non-priority road and
// slot 1 the entry fed by its priority road. For initial occupancies the same
// two slots hold the cars already inside the junction, tagged by direction:
// slot 0 cars leave on out_roads[0] (the straight continuation of the
// non-priority approach), slot 1 cars leave on out_roads[1].
//
// For the figure-eight this reproduces the classic 1-based numbering:
// cells 1..n-1 non-priority, n junction (west), n+1..n+m-1 priority,
// n+m junction (south).

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/rational.hpp>

namespace netphase {

using Rational = boost::rational<std::int64_t>;

class TopologyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Family { FigureEight, TwoJunction, TorusCity };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::FigureEight: return "figure_eight";
    case Family::TwoJunction: return "two_junction";
    case Family::TorusCity: return "torus_city";
  }
  return "?";
}

/// Parameters that fully determine a topology. Road sizes `n`, `m` and
/// `lengths` include the junction at the end of the road; `segment_len`
/// counts only the pure cells between two junctions of the city.
struct TopologySpec {
  Family family = Family::FigureEight;
  int n = 0;
  int m = 0;
  std::array<int, 4> lengths{};
  int rows = 0;
  int cols = 0;
  int segment_len = 0;
  int capacity = 1;

  bool operator==(const TopologySpec&) const = default;
};

enum class SlotKind : std::uint8_t { RoadCell, JunctionEntry };

struct Slot {
  SlotKind kind;
  int road;      // owning road block
  int junction;  // -1 for road cells
};

struct RoadSegment {
  int id = 0;
  int length_cells = 0;  // pure road cells, >= 1
  int from_junction = 0;
  int to_junction = 0;
  bool priority_at_destination = false;
  std::size_t first_slot = 0;
  std::size_t entry_slot = 0;  // == first_slot + length_cells
  std::string label;

  /// Density-counting positions attributed to this road. The junction is
  /// attributed to its non-priority approach, so the figure-eight gives
  /// n and m-1.
  int counting_positions() const { return length_cells + (priority_at_destination ? 0 : 1); }
};

struct JunctionSpec {
  int id = 0;
  int in_priority = 0;
  int in_nonpriority = 0;
  std::array<int, 2> out_roads{};
  int capacity = 1;
  // Turning proportion is fixed at 1/2.
};

class NetworkTopology {
 public:
  struct RoadDraft {
    int length_cells;
    int from_junction;
    int to_junction;
    bool priority_at_destination;
    std::string label;
  };
  struct JunctionDraft {
    int in_priority;
    int in_nonpriority;
    std::array<int, 2> out_roads;
  };

  NetworkTopology(TopologySpec spec, const std::vector<RoadDraft>& roads,
                  const std::vector<JunctionDraft>& junctions)
      : spec_(spec) {
    if (spec.capacity != 1 && spec.capacity != 2)
      throw TopologyError("junction capacity must be 1 or 2");
    if (junctions.empty()) throw TopologyError("network needs at least one junction");

    const int nj = static_cast<int>(junctions.size());
    for (std::size_t i = 0; i < roads.size(); ++i) {
      const auto& d = roads[i];
      if (d.length_cells < 1) throw TopologyError("road " + d.label + " has no cells");
      if (d.from_junction < 0 || d.from_junction >= nj || d.to_junction < 0 ||
          d.to_junction >= nj)
        throw TopologyError("road " + d.label + " references an unknown junction");
      RoadSegment r;
      r.id = static_cast<int>(i);
      r.length_cells = d.length_cells;
      r.from_junction = d.from_junction;
      r.to_junction = d.to_junction;
      r.priority_at_destination = d.priority_at_destination;
      r.label = d.label;
      r.first_slot = slots_.size();
      for (int c = 0; c < d.length_cells; ++c)
        slots_.push_back({SlotKind::RoadCell, r.id, -1});
      r.entry_slot = slots_.size();
      slots_.push_back({SlotKind::JunctionEntry, r.id, d.to_junction});
      roads_.push_back(std::move(r));
    }

    std::vector<int> in_count(roads_.size(), 0), out_count(roads_.size(), 0);
    for (int j = 0; j < nj; ++j) {
      const auto& d = junctions[j];
      JunctionSpec js{j, d.in_priority, d.in_nonpriority, d.out_roads, spec.capacity};
      auto check_road = [&](int id) {
        if (id < 0 || id >= static_cast<int>(roads_.size()))
          throw TopologyError("junction references an unknown road");
        return id;
      };
      const auto& rp = roads_[check_road(d.in_priority)];
      const auto& rn = roads_[check_road(d.in_nonpriority)];
      if (d.in_priority == d.in_nonpriority || d.out_roads[0] == d.out_roads[1])
        throw TopologyError("junction needs two distinct incoming and outgoing roads");
      if (rp.to_junction != j || rn.to_junction != j)
        throw TopologyError("incoming road does not end at junction");
      if (!rp.priority_at_destination || rn.priority_at_destination)
        throw TopologyError("junction must have exactly one priority approach");
      for (int o : d.out_roads)
        if (roads_[check_road(o)].from_junction != j)
          throw TopologyError("outgoing road does not start at junction");
      ++in_count[d.in_priority];
      ++in_count[d.in_nonpriority];
      ++out_count[d.out_roads[0]];
      ++out_count[d.out_roads[1]];
      junctions_.push_back(js);
    }
    for (std::size_t i = 0; i < roads_.size(); ++i)
      if (in_count[i] != 1 || out_count[i] != 1)
        throw TopologyError("road " + roads_[i].label + " is not wired exactly once");
    if (!strongly_connected()) throw TopologyError("network is not strongly connected");
  }

  const TopologySpec& spec() const { return spec_; }
  const std::vector<Slot>& slots() const { return slots_; }
  const std::vector<RoadSegment>& roads() const { return roads_; }
  const std::vector<JunctionSpec>& junctions() const { return junctions_; }
  std::size_t slot_count() const { return slots_.size(); }
  int capacity() const { return spec_.capacity; }

  /// Junction slot 0 (non-priority entry) or 1 (priority entry).
  std::size_t junction_slot(int junction, int which) const {
    const auto& j = junctions_[junction];
    return roads_[which == 0 ? j.in_nonpriority : j.in_priority].entry_slot;
  }

  /// Road cells plus one position per junction.
  int counting_size() const {
    int cells = 0;
    for (const auto& r : roads_) cells += r.length_cells;
    return cells + static_cast<int>(junctions_.size());
  }

  int nonpriority_positions() const {
    int s = 0;
    for (const auto& r : roads_)
      if (!r.priority_at_destination) s += r.counting_positions();
    return s;
  }

  /// Non-priority counting positions over all counting positions.
  Rational ratio_r() const { return Rational(nonpriority_positions(), counting_size()); }

  /// Road that follows `road` when leaving its junction through output `k`.
  int successor(int road, int k) const {
    return junctions_[roads_[road].to_junction].out_roads[k];
  }

  /// A short identifier such as "figure_eight(45,15,c1)".
  std::string id() const {
    std::string s = to_string(spec_.family);
    switch (spec_.family) {
      case Family::FigureEight:
        s += "(" + std::to_string(spec_.n) + "," + std::to_string(spec_.m);
        break;
      case Family::TwoJunction:
        s += "(" + std::to_string(spec_.lengths[0]);
        for (int i = 1; i < 4; ++i) s += "," + std::to_string(spec_.lengths[i]);
        break;
      case Family::TorusCity:
        s += "(" + std::to_string(spec_.rows) + "x" + std::to_string(spec_.cols) + "," +
             std::to_string(spec_.segment_len);
        break;
    }
    return s + ",c" + std::to_string(spec_.capacity) + ")";
  }

 private:
  bool strongly_connected() const {
    const std::size_t nr = roads_.size();
    auto reach = [&](bool forward) {
      std::vector<char> seen(nr, 0);
      std::vector<int> stack{0};
      seen[0] = 1;
      while (!stack.empty()) {
        int r = stack.back();
        stack.pop_back();
        for (std::size_t q = 0; q < nr; ++q) {
          bool edge = forward ? (roads_[q].from_junction == roads_[r].to_junction)
                              : (roads_[r].from_junction == roads_[q].to_junction);
          if (edge && !seen[q]) {
            seen[q] = 1;
            stack.push_back(static_cast<int>(q));
          }
        }
      }
      return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reach(true) && reach(false);
  }

  TopologySpec spec_;
  std::vector<Slot> slots_;
  std::vector<RoadSegment> roads_;
  std::vector<JunctionSpec> junctions_;
};

/// Two circular roads sharing one junction. `n` is the non-priority road
/// size and `m` the priority road size, both including the junction.
inline NetworkTopology build_figure_eight(int n, int m, int capacity = 1) {
  if (n < 2 || m < 2) throw TopologyError("figure-eight needs n >= 2 and m >= 2");
  TopologySpec spec;
  spec.family = Family::FigureEight;
  spec.n = n;
  spec.m = m;
  spec.capacity = capacity;
  // Leaving westward the non-priority traffic continues onto the priority road.
  return NetworkTopology(spec,
                         {{n - 1, 0, 0, false, "nonpriority"}, {m - 1, 0, 0, true, "priority"}},
                         {{1, 0, {1, 0}}});
}

/// Four roads between two junctions. R1 and R2 run from J2 into J1, where R2
/// has priority; R3 and R4 run from J1 into J2, where R3 has priority.
/// Sizes include the destination junction.
inline NetworkTopology build_two_junction(int len_r1, int len_r2, int len_r3, int len_r4,
                                          int capacity = 1) {
  std::array<int, 4> len{len_r1, len_r2, len_r3, len_r4};
  for (int l : len)
    if (l < 2) throw TopologyError("two-junction road sizes must be >= 2");
  TopologySpec spec;
  spec.family = Family::TwoJunction;
  spec.lengths = len;
  spec.capacity = capacity;
  constexpr int J1 = 0, J2 = 1;
  return NetworkTopology(spec,
                         {{len[0] - 1, J2, J1, false, "R1"},
                          {len[1] - 1, J2, J1, true, "R2"},
                          {len[2] - 1, J1, J2, true, "R3"},
                          {len[3] - 1, J1, J2, false, "R4"}},
                         {{1, 0, {2, 3}}, {2, 3, {1, 0}}});
}

/// Regular city on a torus. Row i runs east for even i and west for odd i;
/// column j runs south (increasing row) for even j and north for odd j.
/// At each crossing the approach coming from the right of the other one
/// has priority.
inline NetworkTopology build_torus_city(int rows, int cols, int segment_len, int capacity = 1) {
  if (rows < 2 || cols < 2) throw TopologyError("torus city needs rows >= 2 and cols >= 2");
  if (segment_len < 1) throw TopologyError("torus city needs segment_len >= 1");
  TopologySpec spec;
  spec.family = Family::TorusCity;
  spec.rows = rows;
  spec.cols = cols;
  spec.segment_len = segment_len;
  spec.capacity = capacity;

  auto J = [cols](int i, int j) { return i * cols + j; };
  auto east = [](int i) { return i % 2 == 0; };
  auto south = [](int j) { return j % 2 == 0; };
  const int nj = rows * cols;

  // Road ids: horizontal segment leaving junction (i,j) is J(i,j); vertical
  // segment leaving (i,j) is nj + J(i,j).
  std::vector<NetworkTopology::RoadDraft> roads(2 * nj);
  std::vector<int> h_in(nj), v_in(nj);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      int hj = east(i) ? (j + 1) % cols : (j + cols - 1) % cols;
      int vi = south(j) ? (i + 1) % rows : (i + rows - 1) % rows;
      int h = J(i, j), v = nj + J(i, j);
      int hdst = J(i, hj), vdst = J(vi, j);
      roads[h] = {segment_len, J(i, j), hdst, false,
                  "H" + std::to_string(i) + ":" + std::to_string(j)};
      roads[v] = {segment_len, J(i, j), vdst, false,
                  "V" + std::to_string(i) + ":" + std::to_string(j)};
      h_in[hdst] = h;
      v_in[vdst] = v;
    }
  }
  std::vector<NetworkTopology::JunctionDraft> junctions(nj);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const int id = J(i, j);
      // A westbound car has north on its right, an eastbound one south.
      const bool vertical_priority = (!east(i) && south(j)) || (east(i) && !south(j));
      const int h_out = id, v_out = nj + id;
      auto& jd = junctions[id];
      if (vertical_priority) {
        jd = {v_in[id], h_in[id], {h_out, v_out}};
        roads[v_in[id]].priority_at_destination = true;
      } else {
        jd = {h_in[id], v_in[id], {v_out, h_out}};
        roads[h_in[id]].priority_at_destination = true;
      }
    }
  }
  return NetworkTopology(spec, roads, junctions);
}

inline NetworkTopology build_topology(const TopologySpec& s) {
  switch (s.family) {
    case Family::FigureEight: return build_figure_eight(s.n, s.m, s.capacity);
    case Family::TwoJunction:
      return build_two_junction(s.lengths[0], s.lengths[1], s.lengths[2], s.lengths[3],
                                s.capacity);
    case Family::TorusCity: return build_torus_city(s.rows, s.cols, s.segment_len, s.capacity);
  }
  throw TopologyError("unknown topology family");
}

}  // namespace netphase

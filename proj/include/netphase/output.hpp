#pragma once

// Text formats written by the command line tool.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "netphase/analytic.hpp"
#include "netphase/dyadic.hpp"
#include "netphase/dynamics.hpp"
#include "netphase/metrics.hpp"

namespace netphase {

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// Exact value as an integer or a reduced fraction p/2^e.
inline std::string fraction(double v) {
  if (!std::isfinite(v)) return format_number(v);
  int e = 0;
  double num = v;
  while (num != std::floor(num) && e < 63) {
    num *= 2;
    ++e;
  }
  if (e > 62 || std::abs(num) >= 0x1p63) return format_number(v);
  const auto p = static_cast<long long>(num);
  if (e == 0) return std::to_string(p);
  return std::to_string(p) + "/" + std::to_string(1LL << e);
}

inline std::string fraction(const Dyadic& v) { return v.str(); }

inline std::string fraction(const Rational& q) {
  if (q.denominator() == 1) return std::to_string(q.numerator());
  return std::to_string(q.numerator()) + "/" + std::to_string(q.denominator());
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

/// One row per step: k then x_1..x_N, tab separated, exact values.
template <class Scalar>
void write_counters(std::ostream& os, const std::vector<BasicCounterState<Scalar>>& traj) {
  if (traj.empty()) return;
  os << "k";
  for (std::size_t i = 0; i < traj.front().x.size(); ++i) os << "\tx" << i + 1;
  os << "\n";
  for (const auto& s : traj) {
    os << s.k;
    for (const auto& v : s.x) os << "\t" << fraction(v);
    os << "\n";
  }
}

template <class Scalar>
void write_occupancies(std::ostream& os, const std::vector<std::vector<Scalar>>& ys) {
  if (ys.empty()) return;
  os << "k";
  for (std::size_t i = 0; i < ys.front().size(); ++i) os << "\ty" << i + 1;
  os << "\n";
  for (std::size_t k = 0; k < ys.size(); ++k) {
    os << k;
    for (const auto& v : ys[k]) os << "\t" << fraction(v);
    os << "\n";
  }
}

/// Single line picture of the network: every road in driving order ('1' car,
/// '0' empty, '+' partial), then one character per junction.
inline std::string render_occupancy(const NetworkTopology& t, const std::vector<double>& y) {
  auto cell = [](double v) { return v == 0 ? '0' : v == 1 ? '1' : '+'; };
  std::string s;
  for (const auto& r : t.roads()) {
    if (!s.empty()) s += ' ';
    s += r.label + ":";
    for (std::size_t i = r.first_slot; i < r.entry_slot; ++i) s += cell(y[i]);
  }
  s += " J:";
  for (const auto& j : t.junctions()) {
    const double w = y[t.junction_slot(j.id, 0)], so = y[t.junction_slot(j.id, 1)];
    if (w == 0 && so == 0)
      s += '0';
    else if ((w != 0 && w != 1) || (so != 0 && so != 1))
      s += '+';
    else
      s += w != 0 && so != 0 ? 'B' : w != 0 ? 'W' : 'S';
  }
  return s;
}

inline void write_diagram_header(std::ostream& os, bool per_road) {
  os << "topology_id,policy,r,density,flow,phase,converged,seed_count";
  if (per_road) os << ",road_id,road_density,road_flow";
  os << "\n";
}

inline void write_diagram_rows(std::ostream& os, const FundamentalDiagram& diag, bool per_road) {
  for (const auto& p : diag.points) {
    const std::string head = csv_field(diag.topology_id) + "," + diag.policy + "," + format_number(diag.r) + "," +
                             format_number(p.d) + "," + format_number(p.f) + "," + to_string(p.phase) + "," +
                             (p.converged ? "true" : "false") + "," + std::to_string(p.seed_count);
    if (!per_road) {
      os << head << "\n";
      continue;
    }
    for (std::size_t i = 0; i < p.road_density.size(); ++i)
      os << head << "," << i << "," << format_number(p.road_density[i]) << "," << format_number(p.road_flow[i])
         << "\n";
  }
}

/// Two-column series separated by blank lines, '#' headers.
inline void write_plot_data(std::ostream& os, const std::vector<FundamentalDiagram>& diags) {
  bool first = true;
  for (const auto& d : diags) {
    if (!first) os << "\n\n";
    first = false;
    os << "# topology " << d.topology_id << " policy " << d.policy << " r " << format_number(d.r) << "\n";
    os << "# density flow\n";
    for (const auto& p : d.points) os << format_number(p.d) << " " << format_number(p.f) << "\n";
  }
}

/// Flow against density for each diagram, axes [0,1] x [0,1/2].
inline void write_svg(std::ostream& os, const std::vector<FundamentalDiagram>& diags) {
  const double W = 640, H = 400, L = 60, B = 40, T = 20, R = 180;
  const double pw = W - L - R, ph = H - T - B;
  auto X = [&](double d) { return L + d * pw; };
  auto Y = [&](double f) { return T + ph - f / 0.5 * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
                                 "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000", "#aec7e8"};
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double d = i / 4.0, f = i / 8.0;
    os << "<text x=\"" << X(d) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">"
       << format_number(d) << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << Y(f) + 4 << "\" font-size=\"11\" text-anchor=\"end\">"
       << format_number(f) << "</text>\n";
  }
  os << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 4 << "\" font-size=\"12\" text-anchor=\"middle\">density</text>\n";
  os << "<text x=\"14\" y=\"" << T + ph / 2 << "\" font-size=\"12\">flow</text>\n";
  for (std::size_t s = 0; s < diags.size(); ++s) {
    const char* c = colors[s % 12];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"";
    for (const auto& p : diags[s].points) os << X(p.d) << "," << Y(p.f) << " ";
    os << "\"/>\n";
    os << "<text x=\"" << L + pw + 10 << "\" y=\"" << T + 14 + 14 * static_cast<double>(s) << "\" font-size=\"11\" fill=\""
       << c << "\">" << diags[s].policy << " r=" << format_number(std::round(diags[s].r * 1000) / 1000) << "</text>\n";
  }
  os << "</svg>\n";
}

/// Analytic eigenvalue table over densities i/points.
inline void write_eigen_table(std::ostream& os, int n, int m, int capacity, int points) {
  const auto b = phase_boundaries(n, m);
  os << "# n=" << n << " m=" << m << " capacity=" << capacity << " d1=" << fraction(b.d1) << " d2=" << fraction(b.d2)
     << " r=" << fraction(b.r) << " rho=" << fraction(b.rho) << "\n";
  os << "density,regime,candidates,selected,flow_approx,multi_valued\n";
  for (int i = 0; i <= points; ++i) {
    const Rational d(i, points);
    auto e = eigen_candidates(d, n, m, capacity);
    std::string cands;
    for (const auto& c : e.candidates) cands += (cands.empty() ? "" : ";") + fraction(c);
    if (e.interval) cands = "[0;" + std::to_string(capacity) + "]";
    const Rational f = flow_approx(d, b.r, capacity);
    os << fraction(d) << "," << b.regime(d) << "," << cands << "," << fraction(e.selected) << "," << fraction(f)
       << "," << (e.multiplicity() > 1 || e.interval ? "true" : "false") << "\n";
  }
}

inline void write_trace(std::ostream& os, const std::vector<double>& distance) {
  os << "step,distance\n";
  for (std::size_t k = 0; k < distance.size(); ++k) os << k << "," << format_number(distance[k]) << "\n";
}

inline void write_segments_header(std::ostream& os) { os << "topology_id,policy,source,phase,d_lo,d_hi\n"; }

inline void write_segments(std::ostream& os, const std::string& topology_id, const std::string& policy,
                           const std::string& source, const std::vector<PhaseSegment>& segs) {
  for (const auto& s : segs)
    os << csv_field(topology_id) << "," << policy << "," << source << "," << to_string(s.phase) << ","
       << format_number(s.d_lo) << "," << format_number(s.d_hi) << "\n";
}

}  // namespace netphase

#pragma once

// Closed-form eigenvalue, flow and phase formulas for the one-junction
// network. Every function is a template over the number type so boundaries
// can be evaluated exactly (Rational) or quickly (double).

#include <algorithm>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "netphase/topology.hpp"

namespace netphase {

enum class PhaseLabel : std::uint8_t { Free, Saturation, Recession, Freeze };

inline const char* to_string(PhaseLabel p) {
  switch (p) {
    case PhaseLabel::Free: return "free";
    case PhaseLabel::Saturation: return "saturation";
    case PhaseLabel::Recession: return "recession";
    case PhaseLabel::Freeze: return "freeze";
  }
  return "?";
}

inline std::optional<PhaseLabel> parse_phase(std::string_view s) {
  for (auto p : {PhaseLabel::Free, PhaseLabel::Saturation, PhaseLabel::Recession, PhaseLabel::Freeze})
    if (s == to_string(p)) return p;
  return std::nullopt;
}

class AnalyticError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

template <class T>
T rational_as(const Rational& q) {
  if constexpr (std::is_same_v<T, Rational>)
    return q;
  else
    return static_cast<T>(q.numerator()) / static_cast<T>(q.denominator());
}

template <class T>
bool near_zero(const T& v) {
  if constexpr (std::is_same_v<T, Rational>)
    return v == Rational(0);
  else
    return v <= T(1e-12) && v >= T(-1e-12);
}

inline void check_sizes(int n, int m) {
  if (n < 2 || m < 2) throw AnalyticError("road sizes must be >= 2");
}

}  // namespace detail

/// Boundaries of the one-junction network with road sizes n and m.
struct PhaseBoundaries {
  Rational d1, d2, r, rho;

  /// Letter A..F of the density range containing d; the ranges partition [0, 1].
  template <class T>
  char regime(const T& d) const {
    using detail::rational_as;
    const T D1 = rational_as<T>(d1), D2 = rational_as<T>(d2), R = rational_as<T>(r);
    if (d < std::min(D1, R)) return 'A';
    if (d < D1) return 'B';
    if (d < std::min(D2, R)) return 'C';
    if (d < D2) return 'D';
    if (d < std::max(D2, R)) return 'E';
    return 'F';
  }
};

inline PhaseBoundaries phase_boundaries(int n, int m) {
  detail::check_sizes(n, m);
  PhaseBoundaries b;
  b.rho = Rational(1, n + m - 1);
  b.r = Rational(n, n + m - 1);
  b.d1 = (1 + b.rho) / 4;
  b.d2 = (2 * b.r + 1 - b.rho) / 4;
  return b;
}

template <class T>
struct BasicEigenResult {
  /// Distinct nonnegative solutions, ascending.
  std::vector<T> candidates;
  /// Value the long-run flow follows: 0 when it is a solution, the smallest
  /// candidate otherwise.
  T selected{};
  /// Set when every λ in [0, candidates.back()] solves the identity.
  bool interval = false;

  std::size_t multiplicity() const { return candidates.size(); }
};
using EigenResult = BasicEigenResult<double>;
using ExactEigenResult = BasicEigenResult<Rational>;

/// Right-hand side of the eigenvalue identity; zero exactly at solutions.
/// Capacity 2 drops the 1/4 term.
template <class T>
T eigen_residual(const T& lambda, const T& d, int n, int m, int capacity = 1) {
  const PhaseBoundaries b = phase_boundaries(n, m);
  const T rho = detail::rational_as<T>(b.rho), r = detail::rational_as<T>(b.r);
  T inner = std::min(d - (1 + rho) * lambda, r - d - (2 * r - 1 + rho) * lambda);
  if (capacity == 1) inner = std::min(inner, T(1) / 4 - lambda);
  return std::max(inner, -lambda);
}

template <class T>
BasicEigenResult<T> eigen_candidates(const T& d, int n, int m, int capacity = 1) {
  if (capacity != 1 && capacity != 2) throw AnalyticError("capacity must be 1 or 2");
  if (d < T(0) || d > T(1)) throw AnalyticError("density outside [0,1]");
  const PhaseBoundaries b = phase_boundaries(n, m);
  const T rho = detail::rational_as<T>(b.rho), r = detail::rational_as<T>(b.r);
  const T slope = 2 * r - 1 + rho;

  // λ > 0 solves the identity iff the inner minimum vanishes there, so the
  // candidates are the zeros of its three affine pieces.
  std::vector<T> trial{T(0), d / (1 + rho)};
  if (capacity == 1) trial.push_back(T(1) / 4);
  BasicEigenResult<T> out;
  if (!detail::near_zero(slope)) {
    trial.push_back((r - d) / slope);
  } else if (detail::near_zero(r - d)) {
    out.interval = true;
  }
  for (const T& l : trial) {
    if (l < T(0)) continue;
    if (!detail::near_zero(eigen_residual(l, d, n, m, capacity))) continue;
    bool dup = false;
    for (const T& c : out.candidates) dup = dup || detail::near_zero(c - l);
    if (!dup) out.candidates.push_back(l);
  }
  std::sort(out.candidates.begin(), out.candidates.end());
  if (out.interval) {
    // The third piece vanishes identically; solutions fill [0, cap] where
    // cap is where the first remaining piece reaches zero.
    T cap = d / (1 + rho);
    if (capacity == 1) cap = std::min(cap, T(1) / 4);
    out.candidates.erase(std::remove_if(out.candidates.begin(), out.candidates.end(),
                                        [&](const T& c) { return c > cap; }),
                         out.candidates.end());
    if (out.candidates.empty() || !detail::near_zero(out.candidates.back() - cap))
      out.candidates.push_back(cap);
  }
  out.selected = out.candidates.empty() ? T(0) : out.candidates.front();
  return out;
}

/// Long-run flow predicted from density d and non-priority ratio r. Capacity
/// 2 drops the 1/4 cap. For r <= 1/2 the recession term is +inf below r and
/// the flow is 0 from r on.
template <class T>
T flow_approx(const T& d, const T& r, int capacity = 1) {
  if (capacity != 1 && capacity != 2) throw AnalyticError("capacity must be 1 or 2");
  if (d < T(0) || d > T(1)) throw AnalyticError("density outside [0,1]");
  if (!(r > T(0) && r < T(1))) throw AnalyticError("ratio r outside (0,1)");
  T f = d;
  if (capacity == 1) f = std::min(f, T(1) / 4);
  const T slope = 2 * r - 1;
  if (slope > T(0)) {
    f = std::min(f, (r - d) / slope);
  } else if (!(d < r)) {
    return T(0);
  }
  return std::max(f, T(0));
}

template <class T>
PhaseLabel classify_phase_analytic(const T& d, int n, int m) {
  if (d < T(0) || d > T(1)) throw AnalyticError("density outside [0,1]");
  const PhaseBoundaries b = phase_boundaries(n, m);
  const T d1 = detail::rational_as<T>(b.d1), d2 = detail::rational_as<T>(b.d2),
          r = detail::rational_as<T>(b.r);
  if (!(d < r)) return PhaseLabel::Freeze;
  if (d < d1) return PhaseLabel::Free;
  if (d < d2) return PhaseLabel::Saturation;
  return PhaseLabel::Recession;
}

template <class T>
struct BasicRoadDiagramPoint {
  T d_m;  // priority road
  T d_n;  // non-priority road
  T f;
  PhaseLabel phase;
};
using RoadDiagramPoint = BasicRoadDiagramPoint<double>;

/// Per-road densities and flow of a long one-junction network (r > 1/2).
template <class T>
BasicRoadDiagramPoint<T> road_diagrams(const T& d, const T& r) {
  if (d < T(0) || d > T(1)) throw AnalyticError("density outside [0,1]");
  if (!(r > T(1) / 2 && r < T(1))) throw AnalyticError("road diagrams need 1/2 < r < 1");
  const T quarter = T(1) / 4;
  const T d2 = (2 * r + 1) / 4;
  BasicRoadDiagramPoint<T> p{};
  if (d < quarter) {
    p = {d, d, d, PhaseLabel::Free};
  } else if (d < d2) {
    p = {quarter, d / r - (1 - r) / (4 * r), quarter, PhaseLabel::Saturation};
  } else if (d < r) {
    const T dm = (r - d) / (2 * r - 1);
    p = {dm, (d - (1 - r) * dm) / r, dm, PhaseLabel::Recession};
  } else {
    p = {(d - r) / (1 - r), T(1), T(0), PhaseLabel::Freeze};
  }
  return p;
}

}  // namespace netphase

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "netphase/analytic.hpp"

using namespace netphase;

namespace {

using Q = Rational;

// Candidate sets listed per density range for capacity 1; each listed value
// is a possible solution, not necessarily attained.
std::vector<Q> listed_candidates(const Q& d, int n, int m, char regime) {
  const auto b = phase_boundaries(n, m);
  const Q a = d / (1 + b.rho);
  const Q slope = 2 * b.r - 1 + b.rho;
  const Q e = slope != Q(0) ? (b.r - d) / slope : Q(-1);
  switch (regime) {
    case 'A': return {a};
    case 'B': return {a, e, Q(0)};
    case 'C': return {Q(1, 4)};
    case 'D': return {Q(1, 4), e, Q(0)};
    case 'E': return {e};
    default: return {Q(0)};
  }
}

bool contains(const std::vector<Q>& v, const Q& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

TEST_CASE("phase boundaries are exact", "[analytic]") {
  auto b = phase_boundaries(45, 15);
  CHECK(b.d1 == Q(15, 59));
  CHECK(b.d2 == Q(37, 59));
  CHECK(b.r == Q(45, 59));
  CHECK(b.rho == Q(1, 59));

  auto c = phase_boundaries(5, 5);
  CHECK(c.d1 == Q(5, 18));
  CHECK(c.d2 == Q(1, 2));
  CHECK(c.r == Q(5, 9));

  auto e = phase_boundaries(40, 20);
  CHECK(e.d1 == Q(15, 59));
  CHECK(e.d2 == Q(69, 118));
  CHECK(e.r == Q(40, 59));

  for (int n = 2; n <= 120; ++n)
    for (int m = 2; m <= 120; ++m) {
      auto p = phase_boundaries(n, m);
      REQUIRE(Q(0) < p.d1);
      REQUIRE(p.d1 < p.d2);
      REQUIRE(p.d2 < Q(1));
      REQUIRE(p.d1 == Q(n + m, 4 * (n + m - 1)));
      REQUIRE(p.d2 == Q(3 * n + m - 2, 4 * (n + m - 1)));
    }
  CHECK_THROWS_AS(phase_boundaries(1, 5), AnalyticError);
}

TEST_CASE("eigenvalue examples", "[analytic]") {
  auto a = eigen_candidates(0.1, 45, 15);
  REQUIRE(a.multiplicity() == 1);
  CHECK(a.selected == Catch::Approx(0.1 * 59 / 60).epsilon(1e-12));

  auto c = eigen_candidates(Q(1, 2), 45, 15);
  REQUIRE(c.multiplicity() == 1);
  CHECK(c.selected == Q(1, 4));

  auto f = eigen_candidates(Q(1, 2), 15, 45);
  CHECK(contains(f.candidates, Q(0)));
  CHECK(f.selected == Q(0));

  // Without the 1/4 cap the recession piece is the only solution.
  auto big = eigen_candidates(Q(1, 2), 45, 15, 2);
  REQUIRE(big.multiplicity() == 1);
  CHECK(big.selected == Q(31, 64));
  CHECK(big.selected > Q(1, 4));
}

TEST_CASE("every candidate solves the identity", "[analytic][property]") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 80), m = 2 + static_cast<int>(rng() % 80);
    for (int cap : {1, 2}) {
      for (int k = 0; k <= 100; ++k) {
        const Q d(k, 100);
        auto res = eigen_candidates(d, n, m, cap);
        REQUIRE(res.multiplicity() >= 1);
        for (const Q& l : res.candidates) {
          REQUIRE(l >= Q(0));
          REQUIRE(eigen_residual(l, d, n, m, cap) == Q(0));
        }
        REQUIRE((res.selected == Q(0) || contains(res.candidates, res.selected)));
        // Same answer in floating point within 1e-12.
        auto fl = eigen_candidates(static_cast<double>(k) / 100, n, m, cap);
        for (double l : fl.candidates)
          REQUIRE(std::abs(eigen_residual(l, static_cast<double>(k) / 100, n, m, cap)) <= 1e-12);
        REQUIRE(fl.selected ==
                Catch::Approx(boost::rational_cast<double>(res.selected)).margin(1e-12));
      }
    }
  }
}

TEST_CASE("candidates agree with the range-by-range listing", "[analytic][property]") {
  for (int n = 2; n <= 40; ++n)
    for (int m = 2; m <= 40; ++m)
      for (int k = 0; k <= 60; ++k) {
        const Q d(k, 60);
        auto res = eigen_candidates(d, n, m);
        if (res.interval) continue;
        const auto b = phase_boundaries(n, m);
        auto listed = listed_candidates(d, n, m, b.regime(d));
        // At a range endpoint the values of the range just below also solve.
        const bool endpoint = d == b.d1 || d == b.d2 || d == b.r;
        if (endpoint) {
          auto below = listed_candidates(d, n, m, b.regime(d - Q(1, 1000000)));
          listed.insert(listed.end(), below.begin(), below.end());
        }
        INFO("n=" << n << " m=" << m << " d=" << d);
        for (const Q& l : res.candidates) REQUIRE(contains(listed, l));
        for (const Q& l : listed)
          if (l >= Q(0) && eigen_residual(l, d, n, m) == Q(0)) REQUIRE(contains(res.candidates, l));
        const char reg = b.regime(d);
        if (!endpoint && (reg == 'A' || reg == 'C' || reg == 'E' || reg == 'F'))
          REQUIRE(res.multiplicity() == 1);
      }
}

TEST_CASE("selected eigenvalue follows the closed form when r >= 1/2", "[analytic]") {
  for (int n = 2; n <= 60; ++n)
    for (int m = 2; m <= n + 1; ++m) {
      const auto b = phase_boundaries(n, m);
      if (b.r < Q(1, 2)) continue;
      const Q slope = 2 * b.r - 1 + b.rho;
      for (int k = 0; k <= 50; ++k) {
        const Q d(k, 50);
        Q expect = std::min(d / (1 + b.rho), Q(1, 4));
        expect = std::max(std::min(expect, (b.r - d) / slope), Q(0));
        REQUIRE(eigen_candidates(d, n, m).selected == expect);
      }
    }
}

TEST_CASE("degenerate slope yields an interval of solutions", "[analytic]") {
  // 2r - 1 + rho = 0 when m = n + 2; at d = r the third piece vanishes.
  const int n = 6, m = 8;
  const Q r = phase_boundaries(n, m).r;
  auto res = eigen_candidates(r, n, m);
  CHECK(res.interval);
  CHECK(res.selected == Q(0));
  CHECK(res.candidates.back() == std::min(r / (1 + Q(1, 13)), Q(1, 4)));
  for (int k = 0; k <= 10; ++k) {
    const Q l = res.candidates.back() * Q(k, 10);
    CHECK(eigen_residual(l, r, n, m) == Q(0));
  }
}

TEST_CASE("flow approximation examples", "[analytic]") {
  CHECK(flow_approx(0.5, 0.75) == 0.25);
  CHECK(flow_approx(0.7, 0.75) == Catch::Approx(0.1).epsilon(1e-12));
  CHECK(flow_approx(0.6, 0.5) == 0.0);
  CHECK(flow_approx(0.3, 0.5) == 0.25);
  CHECK(flow_approx(0.1, 0.5) == 0.1);
  CHECK(flow_approx(0.5, 0.75, 2) == 0.5);
  CHECK(flow_approx(Q(7, 10), Q(3, 4)) == Q(1, 10));
  CHECK_THROWS_AS(flow_approx(0.5, 1.0), AnalyticError);
  CHECK_THROWS_AS(flow_approx(1.5, 0.5), AnalyticError);
}

TEST_CASE("flow approximation is bounded and continuous", "[analytic][property]") {
  const int steps = 4000;
  const double h = 1.0 / steps;
  for (int ri = 1; ri < 100; ++ri) {
    const double r = ri / 100.0;
    double prev = flow_approx(0.0, r);
    for (int k = 0; k <= steps; ++k) {
      const double d = k * h;
      const double f1 = flow_approx(d, r, 1), f2 = flow_approx(d, r, 2);
      REQUIRE(f1 >= 0.0);
      REQUIRE(f1 <= 0.25);
      REQUIRE(f2 <= 0.5 + 1e-15);
      REQUIRE(f1 <= f2);
      if (r > 0.5) {
        const double slope = std::max(1.0, 1.0 / (2 * r - 1));
        REQUIRE(std::abs(f1 - prev) <= h * slope + 1e-12);
      }
      prev = f1;
    }
  }
}

TEST_CASE("phase classification examples", "[analytic]") {
  CHECK(classify_phase_analytic(0.5, 45, 15) == PhaseLabel::Saturation);
  CHECK(classify_phase_analytic(0.7, 45, 15) == PhaseLabel::Recession);
  CHECK(classify_phase_analytic(0.3, 15, 75) == PhaseLabel::Freeze);
  CHECK(classify_phase_analytic(0.1, 45, 15) == PhaseLabel::Free);
  CHECK(classify_phase_analytic(Q(15, 59), 45, 15) == PhaseLabel::Saturation);
  CHECK(classify_phase_analytic(Q(45, 59), 45, 15) == PhaseLabel::Freeze);
  // r < 1/4: nothing between free and freeze.
  for (int k = 0; k <= 100; ++k) {
    auto p = classify_phase_analytic(Q(k, 100), 15, 75);
    CHECK((p == PhaseLabel::Free || p == PhaseLabel::Freeze));
  }
  CHECK(parse_phase("recession") == PhaseLabel::Recession);
  CHECK_FALSE(parse_phase("jam").has_value());
}

TEST_CASE("phase boundaries sit at the kinks of the flow curve", "[analytic][property]") {
  const int n = 900, m = 300;  // large roads: rho is far below the grid step
  const auto b = phase_boundaries(n, m);
  const double r = boost::rational_cast<double>(b.r);
  const int steps = 500;
  const double h = 1.0 / steps;
  std::vector<double> f(steps + 1);
  for (int k = 0; k <= steps; ++k) f[k] = flow_approx(k * h, r);
  std::vector<std::pair<double, double>> kinks;  // (|second difference|, d)
  for (int k = 1; k < steps; ++k) kinks.push_back({std::abs(f[k + 1] - 2 * f[k] + f[k - 1]), k * h});
  std::sort(kinks.rbegin(), kinks.rend());
  // Three kinks, each a boundary; nearby grid points may share a kink.
  for (double target : {boost::rational_cast<double>(b.d1), boost::rational_cast<double>(b.d2), r}) {
    bool found = false;
    for (std::size_t i = 0; i < 6 && i < kinks.size(); ++i)
      found = found || std::abs(kinks[i].second - target) <= h + 1e-12;
    CHECK(found);
  }
  // Label changes only between grid points adjacent to a kink.
  for (int k = 1; k <= steps; ++k) {
    if (classify_phase_analytic((k - 1) * h, n, m) == classify_phase_analytic(k * h, n, m)) continue;
    double best = 1;
    for (double t : {boost::rational_cast<double>(b.d1), boost::rational_cast<double>(b.d2), r})
      best = std::min(best, std::abs(k * h - t));
    CHECK(best <= h);
  }
}

TEST_CASE("road diagram examples", "[analytic]") {
  auto s = road_diagrams(Q(1, 2), Q(3, 4));
  CHECK(s.phase == PhaseLabel::Saturation);
  CHECK(s.d_m == Q(1, 4));
  CHECK(s.d_n == Q(7, 12));
  CHECK(s.f == Q(1, 4));

  auto fr = road_diagrams(0.1, 0.75);
  CHECK(fr.phase == PhaseLabel::Free);
  CHECK(fr.d_m == 0.1);
  CHECK(fr.d_n == 0.1);
  CHECK(fr.f == 0.1);

  auto z = road_diagrams(Q(9, 10), Q(3, 4));
  CHECK(z.phase == PhaseLabel::Freeze);
  CHECK(z.d_n == Q(1));
  CHECK(z.d_m == Q(3, 5));
  CHECK(z.f == Q(0));

  CHECK_THROWS_AS(road_diagrams(0.3, 0.5), AnalyticError);
  CHECK_THROWS_AS(road_diagrams(0.3, 0.4), AnalyticError);
}

TEST_CASE("road diagrams keep the density relation exactly", "[analytic][property]") {
  for (int rn = 51; rn < 100; ++rn) {
    const Q r(rn, 100);
    for (int k = 0; k <= 200; ++k) {
      const Q d(k, 200);
      auto p = road_diagrams(d, r);
      REQUIRE(d == r * p.d_n + (1 - r) * p.d_m);
      REQUIRE(p.d_m >= Q(0));
      REQUIRE(p.d_m <= Q(1));
      REQUIRE(p.d_n >= Q(0));
      REQUIRE(p.d_n <= Q(1));
      REQUIRE(p.f == flow_approx(d, r));
    }
  }
}

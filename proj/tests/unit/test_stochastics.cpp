#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "common.hpp"
#include "rng.hpp"
#include "stochastics.hpp"

using namespace weakcv;

namespace {
const double kSqrt3 = std::sqrt(3.0);
}

TEST_CASE("Hermite values match an independent high-precision table") {
  struct Case {
    int k;
    double x;
    double want;
  };
  // evaluated with 50-digit arithmetic from the probabilists' polynomials,
  // rescaled by 1/sqrt(k!)
  const Case cases[] = {
      {0, -0.75, 1.0},
      {0, kSqrt3, 1.0},
      {0, 2.125, 1.0},
      {1, -0.75, -0.75},
      {1, kSqrt3, 1.73205080756887729352744634151},
      {1, 2.125, 2.125},
      {2, -0.75, -0.309359216769114541925369408421},
      {2, kSqrt3, 1.41421356237309504880168872421},
      {2, 2.125, 2.48592227760895614047171846052},
      {3, -0.75, 0.746328906004249576794484991512},
      {3, kSqrt3, 0.0},
      {3, 2.125, 1.31484654487287131638259161432},
      {5, -0.75, -0.663525227133943909905635757387},
      {5, kSqrt3, -0.948683298050513799599668063330},
      {5, 2.125, -1.89433811350522547061569561675},
      {8, -0.75, -0.347054412845703029358293269201},
      {8, kSqrt3, 0.298807152333598409992204294923},
      {8, 2.125, 1.63416160919079666728214741830},
      {12, -0.75, -0.482713101858864086063616320800},
      {12, kSqrt3, 0.996796817864050017401651405721},
      {12, 2.125, 0.657109954354875346855332221227},
      {20, -0.75, -0.468828559794621147688846927544},
      {20, kSqrt3, 0.0525736322890108129420255055703},
      {20, 2.125, -1.30866963024801382813235978861},
  };
  for (const Case& c : cases)
    CHECK(hermite(c.k, c.x) == doctest::Approx(c.want).epsilon(1e-13));
}

TEST_CASE("Hermite three-term recurrence holds pointwise") {
  RngStream g = RngStream::at(9, phase_tag(Phase::aux), 0, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const double x = 6.0 * g.next_uniform() - 3.0;
    for (int k = 1; k < kHermiteOrderCap; ++k) {
      const double lhs = std::sqrt(k + 1.0) * hermite(k + 1, x);
      const double rhs = x * hermite(k, x) - std::sqrt((double)k) * hermite(k - 1, x);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS((void)hermite(kHermiteOrderCap + 1, 0.0), Error);
}

TEST_CASE("H0..H2 are orthonormal under the three-point law") {
  // P(+-sqrt3) = 1/6, P(0) = 2/3 matches the normal moments up to order 5
  const double pts[3] = {-kSqrt3, 0.0, kSqrt3};
  const double w[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
  for (int a = 0; a <= 2; ++a)
    for (int b = 0; b <= 2; ++b) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += w[i] * hermite(a, pts[i]) * hermite(b, pts[i]);
      CHECK(s == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-14));
    }
}

TEST_CASE("outcome counts") {
  CHECK(outcome_count(1, 1, false) == 2.0);
  CHECK(outcome_count(1, 3, false) == 8.0);
  CHECK(outcome_count(2, 1, false) == 3.0);
  CHECK(outcome_count(2, 2, false) == 9.0);
  CHECK(outcome_count(2, 2, true) == 18.0);
  CHECK(outcome_count(2, 3, true) == 27.0 * 8.0);
}

TEST_CASE("enumerated outcomes form the exact law in canonical order") {
  for (int order : {1, 2})
    for (int m : {1, 2}) {
      const bool with_v = order == 2 && m > 1;
      const auto outs = enumerate_outcomes(order, m, with_v);
      CHECK((double)outs.size() == outcome_count(order, m, with_v));
      double total = 0.0;
      for (const auto& o : outs) total += o.prob;
      CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
      // coordinate 0 most significant, values ascending: the first outcome
      // holds the smallest xi everywhere
      for (int i = 0; i < m; ++i)
        CHECK(outs[0].xi[(std::size_t)i] == (order == 1 ? -1.0 : -kSqrt3));
      // means and second moments under the law
      for (int i = 0; i < m; ++i) {
        double e1 = 0.0, e2 = 0.0;
        for (const auto& o : outs) {
          e1 += o.prob * o.xi[(std::size_t)i];
          e2 += o.prob * o.xi[(std::size_t)i] * o.xi[(std::size_t)i];
        }
        CHECK(e1 == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(e2 == doctest::Approx(1.0).epsilon(1e-14));
      }
    }
  CHECK_THROWS_AS((void)enumerate_outcomes(1, 24, false), Error);
}

TEST_CASE("sampled increments match the law") {
  SUBCASE("order 1, m = 3: eight equally likely sign patterns") {
    const int m = 3, cells = 8, n = 80000;
    std::vector<int> count((std::size_t)cells, 0);
    std::vector<double> xi((std::size_t)m);
    for (int i = 0; i < n; ++i) {
      RngStream g = RngStream::at(21, phase_tag(Phase::aux), (std::uint64_t)i, 0);
      sample_increment(g, 1, m, false, xi.data(), nullptr);
      int cell = 0;
      for (int k = 0; k < m; ++k) {
        REQUIRE(std::abs(xi[(std::size_t)k]) == 1.0);
        cell = 2 * cell + (xi[(std::size_t)k] > 0 ? 1 : 0);
      }
      ++count[(std::size_t)cell];
    }
    double chi2 = 0.0;
    for (int c = 0; c < cells; ++c) {
      const double expect = n / (double)cells;
      chi2 += (count[(std::size_t)c] - expect) * (count[(std::size_t)c] - expect) / expect;
    }
    CHECK(chi2 < 24.3219);  // 0.999 quantile, 7 degrees of freedom
  }

  SUBCASE("order 2, m = 2 with V: 18 cells with 1/6-2/3 marginals") {
    const int m = 2, n = 90000;
    std::vector<int> count(18, 0);
    std::vector<double> xi(2);
    std::vector<std::int8_t> v(1);
    for (int i = 0; i < n; ++i) {
      RngStream g = RngStream::at(22, phase_tag(Phase::aux), (std::uint64_t)i, 0);
      sample_increment(g, 2, m, true, xi.data(), v.data());
      int cell = 0;
      for (int k = 0; k < m; ++k) {
        const double x = xi[(std::size_t)k];
        REQUIRE((x == 0.0 || std::abs(std::abs(x) - kSqrt3) < 1e-15));
        cell = 3 * cell + (x < -0.5 ? 0 : (x > 0.5 ? 2 : 1));
      }
      REQUIRE((v[0] == -1 || v[0] == 1));
      cell = 2 * cell + (v[0] > 0 ? 1 : 0);
      ++count[(std::size_t)cell];
    }
    const double marg[3] = {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0};
    double chi2 = 0.0;
    for (int c = 0; c < 18; ++c) {
      const double expect = n * marg[c / 6] * marg[(c / 2) % 3] * 0.5;
      chi2 += (count[(std::size_t)c] - expect) * (count[(std::size_t)c] - expect) / expect;
    }
    CHECK(chi2 < 40.790);  // 0.999 quantile, 17 degrees of freedom
  }
}

TEST_CASE("packed V indexing") {
  CHECK(pair_count(1) == 0);
  CHECK(pair_count(2) == 1);
  CHECK(pair_count(5) == 10);
  CHECK(v_index(3, 0, 1) == 0);
  CHECK(v_index(3, 0, 2) == 1);
  CHECK(v_index(3, 1, 2) == 2);
  const std::int8_t v[3] = {1, -1, 1};
  CHECK(v_entry(v, 3, 0, 1) == 1.0);
  CHECK(v_entry(v, 3, 1, 0) == -1.0);  // antisymmetric
  CHECK(v_entry(v, 3, 0, 2) == -1.0);
  CHECK(v_entry(v, 3, 2, 2) == -1.0);  // diagonal fixed at -1
}

TEST_CASE("term system enumerates in canonical order") {
  const auto t1 = cv_terms(1, 2, false);
  REQUIRE(t1.size() == 3);  // 2^2 - 1
  CHECK((t1[0].o == std::vector<std::uint8_t>{0, 1}));
  CHECK((t1[1].o == std::vector<std::uint8_t>{1, 0}));
  CHECK((t1[2].o == std::vector<std::uint8_t>{1, 1}));
  const double xi[2] = {-1.0, 1.0};
  CHECK(term_factor(t1[0], 1, xi, nullptr) == 1.0);
  CHECK(term_factor(t1[1], 1, xi, nullptr) == -1.0);
  CHECK(term_factor(t1[2], 1, xi, nullptr) == -1.0);

  CHECK(cv_terms(2, 2, true).size() == 17);  // 3^2 * 2 - 1
  CHECK(cv_terms(2, 1, false).size() == 2);
}

TEST_CASE("factor system is orthonormal under the outcome law") {
  // the constant together with every term factor forms an orthonormal basis
  // of functions on the outcome space; this is what makes the one-step sums
  // of a recursive model collapse exactly
  for (int order : {1, 2})
    for (int m : {1, 2}) {
      const bool with_v = order == 2 && m > 1;
      const auto outs = enumerate_outcomes(order, m, with_v);
      const auto terms = cv_terms(order, m, with_v);
      REQUIRE(terms.size() + 1 == outs.size());
      for (std::size_t s = 0; s <= terms.size(); ++s)
        for (std::size_t t = s; t <= terms.size(); ++t) {
          double dot = 0.0;
          for (const auto& o : outs) {
            const std::int8_t* vp = o.v.empty() ? nullptr : o.v.data();
            const double fs =
                s == 0 ? 1.0 : term_factor(terms[s - 1], order, o.xi.data(), vp);
            const double ft =
                t == 0 ? 1.0 : term_factor(terms[t - 1], order, o.xi.data(), vp);
            dot += o.prob * fs * ft;
          }
          CHECK(dot == doctest::Approx(s == t ? 1.0 : 0.0).epsilon(1e-13));
        }
    }
}

#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "common.hpp"
#include "regression.hpp"
#include "rng.hpp"

using namespace weakcv;

TEST_CASE("monomial layout") {
  CHECK(monomial_count(3, 1) == 4);
  CHECK(monomial_count(2, 2) == 6);
  CHECK(monomial_count(3, 5) == 56);
  CHECK(monomial_count(0, 4) == 1);

  const auto expo = monomial_exponents(2, 2);
  REQUIRE(expo.size() == 6);
  CHECK((expo[0] == std::vector<int>{0, 0}));
  CHECK((expo[1] == std::vector<int>{0, 1}));
  CHECK((expo[2] == std::vector<int>{1, 0}));
  CHECK((expo[3] == std::vector<int>{0, 2}));
  CHECK((expo[4] == std::vector<int>{1, 1}));
  CHECK((expo[5] == std::vector<int>{2, 0}));
}

TEST_CASE("basis sizes") {
  BasisSpec g;
  g.kind = BasisSpec::Kind::global_poly;
  g.p = 3;
  g.d = 1;
  g.include_payoff = true;
  CHECK(basis_size(g) == 5);
  g.include_payoff = false;
  CHECK(basis_size(g) == 4);

  BasisSpec pw;
  pw.kind = BasisSpec::Kind::piecewise_poly;
  pw.p = 1;
  pw.d = 2;
  pw.Q = 4;
  pw.R = 1.0;
  CHECK(basis_size(pw) == 16 * 3);
}

TEST_CASE("basis validation") {
  BasisSpec b;
  b.p = -1;
  CHECK_THROWS_AS(b.validate(), Error);
  b = BasisSpec{};
  b.d = 0;
  CHECK_THROWS_AS(b.validate(), Error);
  b = BasisSpec{};
  b.kind = BasisSpec::Kind::piecewise_poly;
  b.Q = 0;
  CHECK_THROWS_AS(b.validate(), Error);
  b.Q = 2;
  b.R = 0.0;
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("cube lookup assigns boundaries to the lower cube") {
  CHECK(cube_axis_index(-1.0, 2, 1.0) == 0);
  CHECK(cube_axis_index(-0.5, 2, 1.0) == 0);
  CHECK(cube_axis_index(0.0, 2, 1.0) == 0);  // interior boundary goes down
  CHECK(cube_axis_index(0.25, 2, 1.0) == 1);
  CHECK(cube_axis_index(1.0, 2, 1.0) == 1);
  CHECK(cube_axis_index(0.5, 4, 1.0) == 2);
  CHECK(cube_axis_index(0.4999999, 4, 1.0) == 2);
}

TEST_CASE("piecewise fit solves the hand example") {
  // states +-0.25, +-0.75, responses x^2, two cubes on [-1,1], degree 1;
  // in local coordinates (x - center)/halfwidth each cube fits
  // intercept 0.3125 and slope -+0.5
  BasisSpec b;
  b.kind = BasisSpec::Kind::piecewise_poly;
  b.p = 1;
  b.Q = 2;
  b.R = 1.0;
  b.d = 1;
  std::vector<double> xs = {-0.75, -0.25, 0.25, 0.75};
  std::vector<double> ys;
  for (double x : xs) ys.push_back(x * x);
  const RegressionEstimate est = fit(xs, ys, b);
  REQUIRE(est.coefficients.size() == 4);
  CHECK(est.coefficients[0] == doctest::Approx(0.3125).epsilon(1e-12));
  CHECK(est.coefficients[1] == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK(est.coefficients[2] == doctest::Approx(0.3125).epsilon(1e-12));
  CHECK(est.coefficients[3] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_FALSE(est.underdetermined);
  CHECK(est.rank == 4);

  CHECK(est.evaluate(std::vector<double>{-0.5}) ==
        doctest::Approx(0.3125).epsilon(1e-12));
  CHECK(est.evaluate(std::vector<double>{0.5}) ==
        doctest::Approx(0.3125).epsilon(1e-12));
  CHECK(est.evaluate(std::vector<double>{0.25}) ==
        doctest::Approx(0.0625).epsilon(1e-12));
  CHECK(est.evaluate(std::vector<double>{1.5}) == 0.0);   // outside the box
  CHECK(est.evaluate(std::vector<double>{-1.5}) == 0.0);
}

TEST_CASE("global fit with the payoff column recovers an exact combination") {
  BasisSpec b;
  b.kind = BasisSpec::Kind::global_poly;
  b.p = 2;
  b.include_payoff = true;
  b.d = 2;
  const auto f = [](const double* x) { return std::sin(x[0] + x[1]); };
  std::vector<double> xs, ys;
  RngStream g = RngStream::at(7, phase_tag(Phase::aux), 0, 0);
  for (int i = 0; i < 500; ++i) {
    const double x0 = 2.0 * g.next_uniform() - 1.0;
    const double x1 = 2.0 * g.next_uniform() - 1.0;
    xs.push_back(x0);
    xs.push_back(x1);
    const double xv[2] = {x0, x1};
    ys.push_back(0.3 - 1.2 * x0 + 0.7 * x1 * x1 + 2.0 * f(xv));
  }
  const RegressionEstimate est = fit(xs, ys, b, f);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double xv[2] = {xs[(std::size_t)(2 * i)], xs[(std::size_t)(2 * i + 1)]};
    worst = std::max(worst, std::abs(est.evaluate(xv) - ys[(std::size_t)i]));
  }
  CHECK(worst < 1e-10);
  CHECK(mse_against(est, xs, ys) < 1e-20);
}

TEST_CASE("truncation clamps the evaluation") {
  BasisSpec b;
  b.d = 1;
  b.p = 1;
  b.include_payoff = false;
  std::vector<double> xs = {-1.0, 0.0, 1.0};
  std::vector<double> ys = {-5.0, 0.0, 5.0};
  RegressionEstimate est = fit(xs, ys, b, {}, 2.0);
  CHECK(est.truncation_level == 2.0);
  const double hi = 1.0;
  CHECK(est.evaluate(&hi) == 2.0);
  const double lo = -1.0;
  CHECK(est.evaluate(&lo) == -2.0);
  const double mid = 0.1;
  CHECK(std::abs(est.evaluate(&mid)) < 2.0);
}

TEST_CASE("degenerate designs fall back to the minimum-norm answer") {
  BasisSpec b;
  b.d = 1;
  b.p = 3;
  b.include_payoff = true;
  std::vector<double> xs((std::size_t)50, 0.1), ys;
  for (int i = 0; i < 50; ++i) ys.push_back(1.0 + 0.01 * i);
  const RegressionEstimate est =
      fit(xs, ys, b, [](const double* x) { return x[0] * x[0]; });
  CHECK(est.evaluate(xs.data()) == doctest::Approx(1.245).epsilon(1e-10));

  // fewer rows than columns flags the fit
  std::vector<double> xs2 = {0.0, 1.0};
  std::vector<double> ys2 = {1.0, 2.0};
  BasisSpec b2;
  b2.d = 1;
  b2.p = 3;
  b2.include_payoff = false;
  const RegressionEstimate est2 = fit(xs2, ys2, b2);
  CHECK(est2.underdetermined);
}

TEST_CASE("empty cubes keep zero coefficients") {
  BasisSpec b;
  b.kind = BasisSpec::Kind::piecewise_poly;
  b.p = 1;
  b.Q = 4;
  b.R = 1.0;
  b.d = 1;
  std::vector<double> xs = {-0.9, -0.8, -0.7};  // everything in cube 0
  std::vector<double> ys = {1.0, 1.0, 1.0};
  const RegressionEstimate est = fit(xs, ys, b);
  REQUIRE(est.coefficients.size() == 8);
  for (std::size_t c = 2; c < 8; ++c) CHECK(est.coefficients[c] == 0.0);
  const double empty_side = 0.6;
  CHECK(est.evaluate(&empty_side) == 0.0);
  CHECK_FALSE(est.underdetermined);  // empty cubes are benign, not thin
}

TEST_CASE("fit_multi matches column-by-column fits") {
  BasisSpec b;
  b.d = 1;
  b.p = 2;
  b.include_payoff = false;
  std::vector<double> xs;
  RngStream g = RngStream::at(13, phase_tag(Phase::aux), 0, 0);
  for (int i = 0; i < 200; ++i) xs.push_back(2.0 * g.next_uniform() - 1.0);
  std::vector<std::vector<double>> cols(3);
  for (double x : xs) {
    cols[0].push_back(1.0 + x);
    cols[1].push_back(x * x - 0.5 * x);
    cols[2].push_back(std::exp(x));
  }
  const auto multi = fit_multi(xs, cols, b, {}, 1);
  REQUIRE(multi.size() == 3);
  for (std::size_t c = 0; c < 3; ++c) {
    const RegressionEstimate single = fit(xs, cols[c], b);
    REQUIRE(multi[c].coefficients.size() == single.coefficients.size());
    for (std::size_t k = 0; k < single.coefficients.size(); ++k)
      CHECK(multi[c].coefficients[k] ==
            doctest::Approx(single.coefficients[k]).epsilon(1e-12));
  }
}

TEST_CASE("mse_against measures squared deviation") {
  BasisSpec b;
  b.d = 1;
  b.p = 0;
  b.include_payoff = false;
  std::vector<double> xs = {0.0, 1.0, 2.0, 3.0};
  std::vector<double> ys = {1.0, 1.0, 1.0, 1.0};
  const RegressionEstimate est = fit(xs, ys, b);  // constant 1
  std::vector<double> truth = {0.0, 2.0, 1.0, 1.0};
  // deviations 1, -1, 0, 0 -> mse 0.5
  CHECK(mse_against(est, xs, truth) == doctest::Approx(0.5).epsilon(1e-12));
}

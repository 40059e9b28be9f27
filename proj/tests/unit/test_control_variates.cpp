#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include <doctest.h>

#include "common.hpp"
#include "control_variates.hpp"
#include "models.hpp"
#include "oracle.hpp"
#include "schemes.hpp"
#include "stochastics.hpp"

using namespace weakcv;

TEST_CASE("closed-form transform cancels the payoff exactly") {
  const SdeModel mot = builtin_model("motivating");  // s = x0 = T = 1
  const SchemeSpec sp{1, 4};
  const PathBundle paths = simulate_paths(mot, sp, 10000, 99, Phase::test, 1);
  double mn = 1e300, mx = -1e300, mean = 0.0, m2 = 0.0;
  for (std::int64_t i = 0; i < paths.n_paths; ++i) {
    const double xT = paths.state(i, 4)[0];
    const double g = xT * xT - exact_cv_motivating(1.0, 1.0, paths, i);
    mn = std::min(mn, g);
    mx = std::max(mx, g);
    const double dlt = g - mean;
    mean += dlt / static_cast<double>(i + 1);
    m2 += dlt * (g - mean);
  }
  const double var = m2 / static_cast<double>(paths.n_paths - 1);
  CHECK(var <= 1e-20);
  CHECK(mn == doctest::Approx(2.44140625).epsilon(1e-12));
  CHECK(mx == doctest::Approx(2.44140625).epsilon(1e-12));
}

TEST_CASE("one-step coefficient sums on a known conditional expectation") {
  // driftless unit-diffusion chain: Phi(x, y) = x + y sqrt(dt)
  SdeModel toy;
  toy.id = "toy";
  toy.d = toy.m = 1;
  toy.x0 = {0.0};
  toy.horizon = 1.0;
  toy.drift = [](const double*, double* o) { o[0] = 0.0; };
  toy.diffusion = [](const double*, double* o) { o[0] = 1.0; };
  toy.payoff = [](const double* x) { return x[0] * x[0]; };

  CvModel cv;
  cv.method = CvMethod::rrcv;
  cv.order = 2;
  cv.steps = 1;
  cv.model_id = "toy";
  cv.m = 1;
  cv.with_v = false;
  cv.finalize();

  const double x = 0.7, dt = 0.25;
  // q_1 = payoff = x^2, so a_1 = 2 x sqrt(dt) and a_2 = sqrt(2) dt
  const auto c = coefficients_from_q(cv, toy, 1, &x, dt);
  REQUIRE(c.size() == 2);
  CHECK(c[0] == doctest::Approx(2.0 * x * std::sqrt(dt)).epsilon(1e-14));
  CHECK(c[1] == doctest::Approx(std::sqrt(2.0) * dt).epsilon(1e-14));

  SdeModel lin = toy;
  lin.payoff = [](const double* x) { return x[0]; };
  CvModel cv1 = cv;
  cv1.order = 1;
  cv1.finalize();
  const auto c1 = coefficients_from_q(cv1, lin, 1, &x, dt);
  REQUIRE(c1.size() == 1);
  CHECK(c1[0] == doctest::Approx(std::sqrt(dt)).epsilon(1e-14));
}

TEST_CASE("fitted recursive model on the enumerated law") {
  const SdeModel ars = builtin_model("arsinh1d");
  const SchemeSpec sp{2, 3};
  const PathBundle train = simulate_paths(ars, sp, 4000, 11, Phase::train, 1);
  BasisSpec basis;
  basis.kind = BasisSpec::Kind::global_poly;
  basis.p = 3;
  basis.include_payoff = true;
  basis.d = 1;
  const CvModel cv = fit_rrcv(train, ars, basis);
  const auto [tb, probs] = enumerate_bundle(ars, sp, Phase::test);

  double eM = 0.0, ef = 0.0;
  std::vector<double> g(probs.size());
  for (std::int64_t i = 0; i < tb.n_paths; ++i) {
    const double M = evaluate_cv(cv, ars, tb, i);
    const double f = ars.payoff(tb.state(i, sp.steps));
    eM += probs[(std::size_t)i] * M;
    ef += probs[(std::size_t)i] * f;
    g[(std::size_t)i] = f - M;
  }

  SUBCASE("the transform has mean zero, so the estimator stays unbiased") {
    CHECK(std::abs(eM) <= 1e-12);
  }

  SUBCASE("population variance equals the coefficient-error decomposition") {
    double varg = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      varg += probs[i] * (g[i] - ef) * (g[i] - ef);
    const auto terms = cv_terms(2, 1, false);
    double decomposition = 0.0;
    for (std::int64_t j = 1; j <= sp.steps; ++j)
      for (std::int64_t i = 0; i < tb.n_paths; ++i) {
        const double* x = tb.state(i, j - 1);
        const auto at = coefficients_from_q(cv, ars, j, x, tb.dt);
        for (std::size_t t = 0; t < terms.size(); ++t) {
          const double ex = exact_coefficient_direct(ars, sp, j, terms[t], x);
          decomposition +=
              probs[(std::size_t)i] * (at[t] - ex) * (at[t] - ex);
        }
      }
    CHECK(std::abs(varg - decomposition) <= 1e-10);
  }

  SUBCASE("one-step sums collapse to the direct transform") {
    const auto terms = cv_terms(2, 1, false);
    std::vector<double> xi(1);
    double worst = 0.0;
    for (std::int64_t i = 0; i < tb.n_paths; ++i) {
      double direct = 0.0;
      for (std::int64_t j = 1; j <= sp.steps; ++j) {
        tb.decode_increment(i, j - 1, xi.data(), nullptr);
        const auto at =
            coefficients_from_q(cv, ars, j, tb.state(i, j - 1), tb.dt);
        for (std::size_t t = 0; t < terms.size(); ++t)
          direct += at[t] * term_factor(terms[t], 2, xi.data(), nullptr);
      }
      worst = std::max(worst, std::abs(direct - evaluate_cv(cv, ars, tb, i)));
    }
    CHECK(worst <= 1e-12);
  }

  SUBCASE("the level-zero fit returns the training payoff mean at x0") {
    // every regression carries an intercept, so fitted means equal response
    // means and the backward recursion telescopes the payoff mean into q_0
    double mtr = 0.0;
    for (std::int64_t i = 0; i < train.n_paths; ++i)
      mtr += ars.payoff(train.state(i, sp.steps));
    mtr /= static_cast<double>(train.n_paths);
    const double q0 = cv.estimates[0].evaluate(ars.x0.data());
    CHECK(q0 == doctest::Approx(mtr).epsilon(1e-9));
  }
}

TEST_CASE("martingale payoffs are recovered exactly from enumerated training") {
  // f(x) = x with zero drift keeps every q_j equal to the identity, which a
  // degree-1 basis must reproduce once training covers the exact law
  SdeModel lin;
  lin.id = "lin";
  lin.d = lin.m = 1;
  lin.x0 = {0.3};
  lin.horizon = 1.0;
  lin.drift = [](const double*, double* o) { o[0] = 0.0; };
  lin.diffusion = [](const double*, double* o) { o[0] = 0.8; };
  lin.payoff = [](const double* x) { return x[0]; };

  const SchemeSpec sp{1, 4};
  const auto [train, probs] = enumerate_bundle(lin, sp, Phase::train);
  BasisSpec basis;
  basis.kind = BasisSpec::Kind::global_poly;
  basis.p = 1;
  basis.include_payoff = false;
  basis.d = 1;
  const CvModel cv = fit_rrcv(train, lin, basis);
  // q_0 is fitted on the single state x0, so it is only identifiable there
  const double x0 = lin.x0[0];
  CHECK(std::abs(cv.estimates[0].evaluate(&x0) - x0) <= 1e-13);
  double worst = 0.0;
  for (double x : {-0.5, 0.0, 0.3, 0.9})
    for (std::int64_t j = 1; j < sp.steps; ++j)
      worst = std::max(worst,
                       std::abs(cv.estimates[(std::size_t)j].evaluate(&x) - x));
  CHECK(worst <= 1e-13);

  // sampled training gets there too, up to Monte Carlo noise in the fits
  const PathBundle sampled = simulate_paths(lin, sp, 20000, 5, Phase::train, 1);
  BasisSpec b2 = basis;
  b2.p = 2;
  const CvModel cv2 = fit_rrcv(sampled, lin, b2);
  double msam = 0.0;
  for (std::int64_t i = 0; i < sampled.n_paths; ++i)
    msam += lin.payoff(sampled.state(i, sp.steps));
  msam /= static_cast<double>(sampled.n_paths);
  // the telescoped training mean is reproduced to float precision ...
  CHECK(cv2.estimates[0].evaluate(&x0) == doctest::Approx(msam).epsilon(1e-9));
  // ... while the identity itself is recovered to regression noise
  worst = 0.0;
  for (double x : {-0.5, 0.0, 0.3, 0.9})
    for (std::int64_t j = 1; j < sp.steps; ++j)
      worst = std::max(worst,
                       std::abs(cv2.estimates[(std::size_t)j].evaluate(&x) - x));
  CHECK(worst < 0.05);
}

TEST_CASE("direct coefficient fits track the closed form") {
  const SdeModel mot = builtin_model("motivating");
  const SchemeSpec sp{1, 4};
  const PathBundle train = simulate_paths(mot, sp, 100000, 3, Phase::train, 1);
  BasisSpec basis;
  basis.kind = BasisSpec::Kind::global_poly;
  basis.p = 2;
  basis.include_payoff = false;
  basis.d = 1;
  const CvModel cv = fit_rcv(train, mot, basis);
  REQUIRE(cv.estimates.size() == 4 * cv.terms.size());

  // a_{2,1}(y) = 2 sqrt(dt) y^2 (1 + dt)^2, checked in relative L2 over
  // the step-1 state cloud
  const double dt = 0.25, growth = 1.0 + dt;
  double num = 0.0, den = 0.0;
  for (std::int64_t i = 0; i < 2000; ++i) {
    const double x = train.state(i, 1)[0];
    const double exact = 2.0 * std::sqrt(dt) * x * x * growth * growth;
    const double fitted = cv.estimates[1 * cv.terms.size() + 0].evaluate(&x);
    num += (fitted - exact) * (fitted - exact);
    den += exact * exact;
  }
  CHECK(std::sqrt(num / den) < 0.05);

  // the transform strips most of the payoff variance on fresh paths
  const PathBundle test = simulate_paths(mot, sp, 100000, 3, Phase::test, 1);
  const std::vector<double> mart = evaluate_cv_all(cv, mot, test, 1);
  double mean = 0.0, m2 = 0.0, meanf = 0.0, m2f = 0.0;
  for (std::int64_t i = 0; i < test.n_paths; ++i) {
    const double f = mot.payoff(test.state(i, 4));
    const double gcv = f - mart[(std::size_t)i];
    double dlt = gcv - mean;
    mean += dlt / static_cast<double>(i + 1);
    m2 += dlt * (gcv - mean);
    dlt = f - meanf;
    meanf += dlt / static_cast<double>(i + 1);
    m2f += dlt * (f - meanf);
  }
  CHECK(m2 < 0.05 * m2f);
  CHECK(mean == doctest::Approx(2.44140625).epsilon(5e-3));
}

TEST_CASE("evaluate_cv_all matches the scalar entry point") {
  const SdeModel fx = fixture_model_2d();
  const SchemeSpec sp{2, 2};
  const PathBundle train = simulate_paths(fx, sp, 3000, 31, Phase::train, 1);
  BasisSpec basis;
  basis.kind = BasisSpec::Kind::global_poly;
  basis.p = 2;
  basis.include_payoff = true;
  basis.d = 2;
  const CvModel cv = fit_rrcv(train, fx, basis);
  const PathBundle test = simulate_paths(fx, sp, 500, 32, Phase::test, 1);
  const auto all = evaluate_cv_all(cv, fx, test, 3);
  REQUIRE((std::int64_t)all.size() == test.n_paths);
  for (std::int64_t i = 0; i < test.n_paths; ++i)
    CHECK(all[(std::size_t)i] == evaluate_cv(cv, fx, test, i));
}

TEST_CASE("fitting is deterministic") {
  const SdeModel ars = builtin_model("arsinh1d");
  const PathBundle train = simulate_paths(ars, {2, 3}, 2000, 8, Phase::train, 1);
  BasisSpec basis;
  basis.d = 1;
  basis.p = 3;
  const CvModel a = fit_rrcv(train, ars, basis);
  const CvModel b = fit_rrcv(train, ars, basis);
  REQUIRE(a.estimates.size() == b.estimates.size());
  for (std::size_t i = 0; i < a.estimates.size(); ++i)
    CHECK(a.estimates[i].coefficients == b.estimates[i].coefficients);
}

TEST_CASE("truncation policy defaults and overrides") {
  const SdeModel ars = builtin_model("arsinh1d");
  const PathBundle train = simulate_paths(ars, {2, 2}, 800, 6, Phase::train, 1);

  BasisSpec global;
  global.d = 1;
  global.p = 2;
  CHECK_FALSE(fit_rrcv(train, ars, global).truncation.enabled);

  BasisSpec pw;
  pw.kind = BasisSpec::Kind::piecewise_poly;
  pw.d = 1;
  pw.p = 1;
  pw.Q = 4;
  pw.R = 2.0;
  const CvModel cvp = fit_rrcv(train, ars, pw);
  CHECK(cvp.truncation.enabled);
  CHECK(cvp.truncation.data_driven);
  CHECK(cvp.truncation.A > 0.0);

  CvFitOptions opts;
  opts.truncate = true;
  opts.A = 7.5;
  const CvModel cvo = fit_rrcv(train, ars, global, opts);
  CHECK(cvo.truncation.enabled);
  CHECK(cvo.truncation.A == 7.5);
  CHECK_FALSE(cvo.truncation.data_driven);
}

TEST_CASE("model identity is checked when rebinding") {
  const SdeModel ars = builtin_model("arsinh1d");
  const PathBundle train = simulate_paths(ars, {2, 2}, 500, 6, Phase::train, 1);
  BasisSpec basis;
  basis.d = 1;
  basis.p = 2;
  CvModel cv = fit_rrcv(train, ars, basis);
  CHECK_THROWS_AS(cv.bind_model(builtin_model("motivating")), Error);
  CHECK_NOTHROW(cv.bind_model(ars));
}

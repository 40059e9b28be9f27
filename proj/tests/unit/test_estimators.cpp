#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include <doctest.h>

#include "common.hpp"
#include "control_variates.hpp"
#include "estimators.hpp"
#include "models.hpp"
#include "schemes.hpp"

using namespace weakcv;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("method names round-trip") {
  for (Method m : {Method::smc, Method::mlmc, Method::rcv, Method::rrcv})
    CHECK(method_from_name(method_name(m)) == m);
  CHECK_THROWS_AS((void)method_from_name("qmc"), Error);
}

TEST_CASE("limiting exponents at nu = infinity") {
  const double n1 = n_exponent(Method::rcv, 1, 3, kInf);
  CHECK(n1 == doctest::Approx(45.0 / 34.0).epsilon(1e-15));
  CHECK(std::abs(n1 - 1.3235) < 5e-5);

  const double n5 = n_exponent(Method::rrcv, 5, 3, kInf);
  CHECK(n5 == doctest::Approx(65.0 / 42.0).epsilon(1e-15));
  CHECK(std::abs(n5 - 1.5476) < 5e-5);

  CHECK(complexity_exponent(Method::rcv, 1, 3, kInf) ==
        doctest::Approx(67.0 / 34.0).epsilon(1e-15));
  CHECK(std::abs(complexity_exponent(Method::rrcv, 1, 1000000, kInf) - 1.75) <
        1e-4);
  CHECK(complexity_exponent(Method::smc, 1, 3, kInf) == 2.5);
  CHECK(complexity_exponent(Method::mlmc, 1, 3, kInf) == 2.0);
}

TEST_CASE("finite-nu exponents and continuity at infinity") {
  // rcv d=1 p=3 nu=2: common denominator 2*1*2 + 4*4*(4+1) = 84
  CHECK(q_exponent(Method::rcv, 1, 3, 2.0) ==
        doctest::Approx(34.0 / 84.0).epsilon(1e-15));
  CHECK(r_exponent(Method::rcv, 1, 3, 2.0) ==
        doctest::Approx(23.0 / 84.0).epsilon(1e-15));
  CHECK(n_exponent(Method::rcv, 1, 3, 2.0) ==
        doctest::Approx(122.0 / 84.0).epsilon(1e-15));
  CHECK(complexity_exponent(Method::rcv, 1, 3, 2.0) ==
        doctest::Approx(198.0 / 84.0).epsilon(1e-15));

  // rrcv d=2 p=1 nu=3: denominator 2*2*3 + 4*2*(6+2) = 76
  CHECK(q_exponent(Method::rrcv, 2, 1, 3.0) ==
        doctest::Approx(35.0 / 76.0).epsilon(1e-15));
  CHECK(r_exponent(Method::rrcv, 2, 1, 3.0) ==
        doctest::Approx(10.0 / 76.0).epsilon(1e-15));
  CHECK(n_exponent(Method::rrcv, 2, 1, 3.0) ==
        doctest::Approx(130.0 / 76.0).epsilon(1e-15));
  CHECK(complexity_exponent(Method::rrcv, 2, 1, 3.0) ==
        doctest::Approx(238.0 / 76.0).epsilon(1e-15));

  for (Method m : {Method::rcv, Method::rrcv}) {
    CHECK(std::abs(n_exponent(m, 3, 2, 1e9) - n_exponent(m, 3, 2, kInf)) <
          1e-6);
    CHECK(std::abs(q_exponent(m, 3, 2, 1e9) - q_exponent(m, 3, 2, kInf)) <
          1e-6);
    CHECK(std::abs(r_exponent(m, 3, 2, 1e9) - r_exponent(m, 3, 2, kInf)) <
          1e-6);
  }
}

TEST_CASE("parameter rules at eps = 2^-4") {
  ComplexityParams cp;
  cp.method = Method::rrcv;
  cp.epsilon = 1.0 / 16.0;
  ChosenParameters ch = choose_parameters(cp);
  CHECK(ch.J == 4);
  CHECK(ch.N == 2560);
  CHECK(ch.N0 == 5120);
  CHECK(ch.Q == 2);
  CHECK(ch.R == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ch.warnings.empty());

  cp.method = Method::smc;
  ch = choose_parameters(cp);
  CHECK(ch.N0 == 8192);
  CHECK(ch.J == 4);

  cp.method = Method::mlmc;
  ch = choose_parameters(cp);
  CHECK(ch.mlmc_initial == 1000);
  CHECK(ch.mlmc_M == 4);
  cp.d = 5;
  ch = choose_parameters(cp);
  CHECK(ch.mlmc_initial == 10000);

  // p <= (d-2)/2 and an oversized nu both warn instead of failing
  ComplexityParams bad;
  bad.method = Method::rcv;
  bad.d = 5;
  bad.p = 1;
  bad.nu = 3.0;
  CHECK(choose_parameters(bad).warnings.size() == 2);

  ComplexityParams invalid;
  invalid.epsilon = 1.5;
  CHECK_THROWS_AS((void)choose_parameters(invalid), Error);
}

TEST_CASE("plain Monte Carlo") {
  const SdeModel mot = motivating_model(1.0, 1.0, 1.0);
  const SchemeSpec spec{1, 4};

  SUBCASE("lands within three standard errors of the discrete mean") {
    const ExperimentResult r = estimate_smc(mot, spec, 200000, 7, 1);
    CHECK(std::abs(r.estimate - 2.44140625) <=
          3.0 * std::sqrt(r.empirical_variance));
    CHECK(r.variance_ratio == 1.0);
    CHECK(r.N0 == 200000);
  }

  SUBCASE("streaming matches a stored bundle bit for bit") {
    const PathBundle b = simulate_paths(mot, spec, 5000, 7, Phase::test, 1);
    double s = 0.0;
    for (std::int64_t i = 0; i < b.n_paths; ++i)
      s += mot.payoff(b.state(i, b.steps));
    CHECK(estimate_smc(mot, spec, 5000, 7, 1).estimate == s / 5000.0);
  }

  SUBCASE("constant payoff has zero variance") {
    SdeModel cm = mot;
    cm.payoff = [](const double*) { return 5.0; };
    const ExperimentResult rc = estimate_smc(cm, spec, 100, 3, 1);
    CHECK(rc.estimate == 5.0);
    CHECK(rc.empirical_variance == 0.0);
  }

  SUBCASE("thread count does not change the result") {
    const ExperimentResult a = estimate_smc(mot, spec, 20000, 13, 1);
    const ExperimentResult b = estimate_smc(mot, spec, 20000, 13, 4);
    CHECK(a.estimate == b.estimate);
    CHECK(a.empirical_variance == b.empirical_variance);
  }
}

TEST_CASE("multilevel Monte Carlo") {
  SUBCASE("noiseless dynamics collapse to the drift integral") {
    SdeModel det;
    det.id = "det";
    det.d = det.m = 1;
    det.x0 = {0.0};
    det.horizon = 1.0;
    det.drift = [](const double*, double* out) { out[0] = 0.7; };
    det.diffusion = [](const double*, double* out) { out[0] = 0.0; };
    det.payoff = [](const double* x) { return x[0]; };
    const ExperimentResult rd = estimate_mlmc(det, 0.01, 4, 10, 5, 1);
    CHECK(rd.estimate == 0.7);  // Euler is exact here at any level
    CHECK(rd.J == 16);          // stops as soon as the bias estimate allows
  }

  SUBCASE("hits the reference within a few epsilon") {
    const SdeModel ar = builtin_model("arsinh1d");
    const ExperimentResult rm = estimate_mlmc(ar, 1.0 / 16.0, 4, 1000, 11, 1);
    CHECK(std::abs(rm.estimate - 0.789640) <= 3.0 / 16.0);
    CHECK(rm.N0 > 0);
  }

  SUBCASE("coupled level variances decay geometrically") {
    const SdeModel ar = builtin_model("arsinh1d");
    const double v2 = mlmc_level_stats(ar, 4, 2, 20000, 9, 1).variance;
    const double v3 = mlmc_level_stats(ar, 4, 3, 20000, 9, 1).variance;
    const double v4 = mlmc_level_stats(ar, 4, 4, 20000, 9, 1).variance;
    CHECK(v3 / v2 <= 0.6);
    CHECK(v4 / v3 <= 0.6);
  }
}

TEST_CASE("control-variate estimators") {
  const SdeModel mot = motivating_model(1.0, 1.0, 1.0);
  const SchemeSpec spec{1, 4};

  SUBCASE("an all-zero model reproduces plain Monte Carlo bit for bit") {
    const PathBundle train = simulate_paths(mot, spec, 64, 21, Phase::train, 1);
    BasisSpec basis;
    basis.d = 1;
    basis.p = 1;
    CvModel cv = fit_rcv(train, mot, basis);
    for (auto& est : cv.estimates)
      std::fill(est.coefficients.begin(), est.coefficients.end(), 0.0);
    const ExperimentResult rcv0 = estimate_with_cv(mot, spec, cv, 4096, 33, 1);
    const ExperimentResult rsmc = estimate_smc(mot, spec, 4096, 33, 1);
    CHECK(rcv0.estimate == rsmc.estimate);
    CHECK(rcv0.empirical_variance == rsmc.empirical_variance);
    CHECK(rcv0.variance_ratio == rsmc.variance_ratio);
  }

  SUBCASE("a trained model strips most of the variance") {
    const PathBundle tr = simulate_paths(mot, spec, 20000, 51, Phase::train, 1);
    BasisSpec basis;
    basis.d = 1;
    basis.p = 3;
    const CvModel cv = fit_rcv(tr, mot, basis);
    const ExperimentResult rr = estimate_with_cv(mot, spec, cv, 20000, 52, 1);
    CHECK(rr.variance_ratio < 0.01);
    CHECK(std::abs(rr.estimate - 2.44140625) <
          3.0 * std::sqrt(rr.empirical_variance) + 1e-6);
  }

  SUBCASE("the closed-form coefficients give a zero-variance estimator") {
    const ExperimentResult re = estimate_exact_cv(mot, 1.0, spec, 500, 4, 1);
    CHECK(re.estimate == doctest::Approx(2.44140625).epsilon(1e-12));
    CHECK(re.empirical_variance <= 1e-20);
  }
}

TEST_CASE("single pipeline runs") {
  const SdeModel ar = builtin_model("arsinh1d");
  EstimatorConfig cfg;
  cfg.method = Method::rrcv;
  cfg.scheme = SchemeSpec{2, 4};
  cfg.epsilon = 1.0 / 16.0;
  cfg.N = 2560;
  cfg.N0 = 5120;
  cfg.basis.d = 1;
  cfg.basis.p = 3;
  cfg.threads = 1;

  const ExperimentResult r1 = run_once(ar, cfg, 77);
  const ExperimentResult r1b = run_once(ar, cfg, 77);
  CHECK(r1.estimate == r1b.estimate);
  CHECK(r1.variance_ratio < 0.05);
  CHECK(r1.J == 4);
  CHECK(r1.N == 2560);
  CHECK(r1.N0 == 5120);
}

TEST_CASE("repetition harness") {
  const SdeModel ar = builtin_model("arsinh1d");
  EstimatorConfig cfg;
  cfg.method = Method::rrcv;
  cfg.scheme = SchemeSpec{2, 4};
  cfg.epsilon = 1.0 / 16.0;
  cfg.N = 2560;
  cfg.N0 = 5120;
  cfg.basis.d = 1;
  cfg.basis.p = 3;
  cfg.threads = 1;

  SUBCASE("rmse is taken against the reference when one exists") {
    const ExperimentResult rep = run_repetitions(ar, cfg, 5, 123);
    CHECK(rep.rmse_vs_reference);
    CHECK(rep.repetitions == 5);
    CHECK(std::abs(rep.estimate - 0.789640) < 0.02);
    CHECK(rep.empirical_rmse > 0.0);
  }

  SUBCASE("reduction order is fixed, so threads cannot change the numbers") {
    EstimatorConfig c1 = cfg;
    const ExperimentResult a = run_repetitions(ar, c1, 4, 55);
    c1.threads = 3;
    const ExperimentResult b = run_repetitions(ar, c1, 4, 55);
    CHECK(a.estimate == b.estimate);
    CHECK(a.empirical_rmse == b.empirical_rmse);
  }

  SUBCASE("a deterministic model with an exact reference has zero rmse") {
    SdeModel det;
    det.id = "det";
    det.d = det.m = 1;
    det.x0 = {0.0};
    det.horizon = 1.0;
    det.drift = [](const double*, double* out) { out[0] = 0.5; };
    det.diffusion = [](const double*, double* out) { out[0] = 0.0; };
    det.payoff = [](const double* x) { return x[0]; };
    det.reference_value = 0.5;
    EstimatorConfig dc;
    dc.method = Method::smc;
    dc.scheme = SchemeSpec{1, 2};
    dc.N0 = 16;
    dc.threads = 1;
    CHECK(run_repetitions(det, dc, 3, 9).empirical_rmse == 0.0);
  }

  SUBCASE("without a reference the rmse falls back to the spread") {
    SdeModel anon = ar;
    anon.id = "anon";
    anon.reference_value.reset();
    const ExperimentResult rep = run_repetitions(anon, cfg, 3, 21);
    CHECK_FALSE(rep.rmse_vs_reference);
    CHECK(rep.empirical_rmse > 0.0);
  }

  SUBCASE("a single repetition is rejected") {
    CHECK_THROWS_AS((void)run_repetitions(ar, cfg, 1, 7), Error);
  }
}

TEST_CASE("complexity slope fits") {
  const std::vector<std::pair<double, double>> pts = {
      {0.1, 100.0}, {0.2, 25.0}, {0.4, 6.25}};
  CHECK(fit_complexity_slope(pts) == doctest::Approx(-2.0).epsilon(1e-12));

  CHECK_THROWS_AS((void)fit_complexity_slope({{0.1, 1.0}, {0.2, 2.0}}), Error);
  CHECK_THROWS_AS(
      (void)fit_complexity_slope({{0.1, 1.0}, {0.2, 2.0}, {0.0, 3.0}}), Error);

  bool numerical = false;
  try {
    (void)fit_complexity_slope({{0.1, 1.0}, {0.1, 2.0}, {0.1, 3.0}});
  } catch (const Error& e) {
    numerical = e.kind() == ErrorKind::numerical;
  }
  CHECK(numerical);
}

#include "estimators.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "common.hpp"
#include "rng.hpp"
#include "stochastics.hpp"

namespace weakcv {

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ =
      std::chrono::steady_clock::now();
};

std::int64_t ipow64(std::int64_t base, int exp) {
  std::int64_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

/// ceil with a guard against powers that land on an integer up to rounding
/// error (eps = 2^-k makes eps^-1/2 exactly integral for even k).
std::int64_t ceil_count(double x) {
  const double r = std::nearbyint(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x)))
    return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(x));
}

struct ExponentSet {
  double q, r, n, cost;
};

ExponentSet exponent_set(Method method, int d, int p, double nu) {
  require(method == Method::rcv || method == Method::rrcv, ErrorKind::config,
          "parameter exponents are defined for the rcv/rrcv methods only");
  require(d >= 1, ErrorKind::config, "dimension must be at least 1");
  require(p >= 0, ErrorKind::config, "basis degree must be non-negative");
  require(nu > 0.0, ErrorKind::config, "tail exponent must be positive");
  const double pp = p + 1.0;
  if (std::isinf(nu)) {
    // limits of the finite-nu expressions below as nu grows
    const double den = 2.0 * d + 8.0 * pp;
    return {5.0 / den, 0.0, (5.0 * d + 10.0 * pp) / den,
            (11.0 * d + 14.0 * pp) / den};
  }
  const double den = 2.0 * d * nu + 4.0 * pp * (2.0 * nu + d);
  if (method == Method::rcv)
    return {(5.0 * nu + 6.0 * pp) / den, (6.0 * pp - d) / den,
            (5.0 * d * nu + 2.0 * pp * (5.0 * nu + 4.0 * d)) / den,
            (11.0 * d * nu + 2.0 * pp * (7.0 * nu + 8.0 * d)) / den};
  return {(5.0 * nu + 10.0 * pp) / den, 5.0 * pp / den,
          (5.0 * d * nu + 10.0 * pp * (nu + d)) / den,
          (11.0 * d * nu + 2.0 * pp * (7.0 * nu + 11.0 * d)) / den};
}

double default_c_n(Method method, int d) {
  if (method == Method::rrcv) return d == 1 ? 64.0 : 512.0;
  return 32.0;
}

double default_c_n0(Method method, int d) {
  if (method == Method::rrcv) return 128.0;
  return d == 1 ? 128.0 : 1024.0;
}

struct Moments {
  std::int64_t n = 0;
  double sum = 0.0;
  double sumsq = 0.0;
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  /// Unbiased sample variance.
  double variance() const {
    if (n < 2) return 0.0;
    const double m = mean();
    return std::max(0.0, (sumsq - static_cast<double>(n) * m * m) /
                             static_cast<double>(n - 1));
  }
};

/// Reduces per-block (sum, sumsq) partials in block order so the result is
/// independent of the worker count.
Moments reduce_blocks(std::int64_t n, const std::vector<double>& bsum,
                      const std::vector<double>& bsq) {
  Moments mo;
  mo.n = n;
  for (std::size_t b = 0; b < bsum.size(); ++b) {
    mo.sum += bsum[b];
    mo.sumsq += bsq[b];
  }
  return mo;
}

void check_all_finite(const std::vector<char>& bad, const std::string& where) {
  for (char c : bad)
    require(!c, ErrorKind::numerical,
            where + ": non-finite payoff value encountered");
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::smc:
      return "smc";
    case Method::mlmc:
      return "mlmc";
    case Method::rcv:
      return "rcv";
    case Method::rrcv:
      return "rrcv";
  }
  raise(ErrorKind::contract, "method_name: bad enum value");
}

Method method_from_name(const std::string& name) {
  if (name == "smc") return Method::smc;
  if (name == "mlmc") return Method::mlmc;
  if (name == "rcv") return Method::rcv;
  if (name == "rrcv") return Method::rrcv;
  raise(ErrorKind::config, "unknown method '" + name +
                               "' (expected smc, mlmc, rcv or rrcv)");
}

double n_exponent(Method method, int d, int p, double nu) {
  return exponent_set(method, d, p, nu).n;
}

double q_exponent(Method method, int d, int p, double nu) {
  return exponent_set(method, d, p, nu).q;
}

double r_exponent(Method method, int d, int p, double nu) {
  return exponent_set(method, d, p, nu).r;
}

double complexity_exponent(Method method, int d, int p, double nu) {
  if (method == Method::smc) return 2.5;
  if (method == Method::mlmc) return 2.0;
  return exponent_set(method, d, p, nu).cost;
}

ChosenParameters choose_parameters(const ComplexityParams& cp) {
  require(cp.epsilon > 0.0 && cp.epsilon < 1.0, ErrorKind::config,
          "target precision must lie in (0,1)");
  require(cp.d >= 1, ErrorKind::config, "dimension must be at least 1");
  require(cp.p >= 0, ErrorKind::config, "basis degree must be non-negative");
  require(cp.nu > 0.0, ErrorKind::config, "tail exponent must be positive");
  require(cp.c_J > 0.0 && cp.c_Q > 0.0 && cp.c_R > 0.0, ErrorKind::config,
          "prefactors must be positive");
  const double eps = cp.epsilon;

  ChosenParameters out;
  out.J = std::max<std::int64_t>(
      1, ceil_count(cp.c_J * std::pow(eps, -0.5)));

  if (cp.method == Method::smc) {
    const double cn0 = cp.c_N0 > 0.0 ? cp.c_N0 : (cp.d == 1 ? 32.0 : 512.0);
    out.N0 = std::max<std::int64_t>(2, ceil_count(cn0 * std::pow(eps, -2.0)));
    return out;
  }
  if (cp.method == Method::mlmc) {
    out.mlmc_initial = cp.c_N0 > 0.0
                           ? static_cast<std::int64_t>(cp.c_N0)
                           : (cp.d == 1 ? 1000 : 10000);
    out.mlmc_M = 4;
    out.N0 = out.mlmc_initial;
    out.J = 0;  // determined adaptively by the level loop
    return out;
  }

  const ExponentSet ex = exponent_set(cp.method, cp.d, cp.p, cp.nu);
  const double cn = cp.c_N > 0.0 ? cp.c_N : default_c_n(cp.method, cp.d);
  const double cn0 = cp.c_N0 > 0.0 ? cp.c_N0 : default_c_n0(cp.method, cp.d);
  const double base = static_cast<double>(ceil_count(std::pow(eps, -ex.n)));
  out.N = std::max<std::int64_t>(2, ceil_count(cn * base));
  out.N0 = std::max<std::int64_t>(2, ceil_count(cn0 * base));
  out.Q = std::max<std::int64_t>(1, ceil_count(cp.c_Q * std::pow(eps, -ex.q)));
  out.R = cp.c_R * std::pow(eps, -ex.r);

  if (!(cp.p > (cp.d - 2) / 2.0))
    out.warnings.push_back(
        "basis degree p=" + std::to_string(cp.p) +
        " is outside the theoretical regime p > (d-2)/2 for d=" +
        std::to_string(cp.d) + "; rates are not guaranteed");
  const double slack = 2.0 * (cp.p + 1.0) - cp.d;
  if (slack <= 0.0) {
    out.warnings.push_back(
        "no tail exponent satisfies the theoretical regime when 2(p+1) <= d");
  } else {
    const double bound = 2.0 * cp.d * (cp.p + 1.0) / slack;
    if (!(cp.nu > bound))
      out.warnings.push_back(
          "tail exponent nu is outside the theoretical regime nu > " +
          std::to_string(bound) + "; rates are not guaranteed");
  }
  return out;
}

ExperimentResult estimate_smc(const SdeModel& model, const SchemeSpec& spec,
                              std::int64_t n0, std::uint64_t seed,
                              int threads) {
  require(n0 >= 2, ErrorKind::config,
          "estimate_smc: need at least two paths");
  require(spec.order == 1 || spec.order == 2, ErrorKind::config,
          "estimate_smc: scheme order must be 1 or 2");
  require(spec.steps >= 1, ErrorKind::config,
          "estimate_smc: need at least one step");
  Timer timer;

  // Streams are keyed exactly like a testing bundle, so a control-variate
  // run with the same seed sees the same paths.
  const bool with_v = model_uses_v(model, spec.order);
  const double dt = model.horizon / static_cast<double>(spec.steps);
  const std::uint64_t tag = phase_tag(Phase::test);
  const std::int64_t blocks = block_count(n0);
  std::vector<double> bsum(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> bsq(static_cast<std::size_t>(blocks), 0.0);
  std::vector<char> bad(static_cast<std::size_t>(blocks), 0);

  parallel_blocks(n0, threads,
                  [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    StepWorkspace w;
    std::vector<double> xi(static_cast<std::size_t>(model.m));
    std::vector<std::int8_t> v(
        static_cast<std::size_t>(pair_count(model.m)), -1);
    std::vector<double> cur(static_cast<std::size_t>(model.d));
    std::vector<double> nxt(static_cast<std::size_t>(model.d));
    double s = 0.0, s2 = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      std::copy(model.x0.begin(), model.x0.end(), cur.begin());
      for (std::int64_t j = 0; j < spec.steps; ++j) {
        RngStream rs = RngStream::at(seed, tag, static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(j));
        sample_increment(rs, spec.order, model.m, with_v, xi.data(),
                         v.data());
        step_scheme(w, model, spec.order, cur.data(), xi.data(), v.data(),
                    dt, nxt.data());
        cur.swap(nxt);
      }
      const double f = model.payoff(cur.data());
      if (!std::isfinite(f)) bad[static_cast<std::size_t>(b)] = 1;
      s += f;
      s2 += f * f;
    }
    bsum[static_cast<std::size_t>(b)] = s;
    bsq[static_cast<std::size_t>(b)] = s2;
  });
  check_all_finite(bad, "estimate_smc");

  const Moments mo = reduce_blocks(n0, bsum, bsq);
  ExperimentResult r;
  r.method = Method::smc;
  r.estimate = mo.mean();
  r.empirical_variance = mo.variance() / static_cast<double>(n0);
  r.variance_ratio = 1.0;
  r.J = spec.steps;
  r.N0 = n0;
  r.repetitions = 1;
  r.seed = seed;
  r.wall_seconds = timer.seconds();
  return r;
}

namespace {

/// Sum and sum of squares of the level-l coupled differences
/// f(fine) - f(coarse) over paths [0, n). Level 0 has no coarse path.
void mlmc_level_sums(const SdeModel& model, int M, int level, std::int64_t n,
                     std::uint64_t seed, int threads, double* out_sum,
                     double* out_sumsq) {
  const std::int64_t fine_steps = ipow64(M, level);
  const double dtf = model.horizon / static_cast<double>(fine_steps);
  const double dtc = dtf * static_cast<double>(M);
  const double sdtf = std::sqrt(dtf);
  const std::uint64_t tag =
      phase_tag(Phase::mlmc, static_cast<std::uint64_t>(level));
  const std::int64_t blocks = block_count(n);
  std::vector<double> bsum(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> bsq(static_cast<std::size_t>(blocks), 0.0);
  std::vector<char> bad(static_cast<std::size_t>(blocks), 0);

  parallel_blocks(n, threads,
                  [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    StepWorkspace w;
    const std::size_t d = static_cast<std::size_t>(model.d);
    const std::size_t m = static_cast<std::size_t>(model.m);
    std::vector<double> xf(d), xc(d), nx(d), dw(m), dwc(m);
    double s = 0.0, s2 = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      std::copy(model.x0.begin(), model.x0.end(), xf.begin());
      std::copy(model.x0.begin(), model.x0.end(), xc.begin());
      std::fill(dwc.begin(), dwc.end(), 0.0);
      for (std::int64_t k = 0; k < fine_steps; ++k) {
        RngStream rs = RngStream::at(seed, tag, static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(k));
        for (std::size_t l = 0; l < m; ++l) dw[l] = sdtf * rs.next_normal();
        w.prepare(model, xf.data(), 1);
        step_euler_maruyama(w, model, xf.data(), dw.data(), dtf, nx.data());
        xf.swap(nx);
        if (level > 0) {
          for (std::size_t l = 0; l < m; ++l) dwc[l] += dw[l];
          if ((k + 1) % M == 0) {
            // coarse step driven by the summed fine increments
            w.prepare(model, xc.data(), 1);
            step_euler_maruyama(w, model, xc.data(), dwc.data(), dtc,
                                nx.data());
            xc.swap(nx);
            std::fill(dwc.begin(), dwc.end(), 0.0);
          }
        }
      }
      double diff = model.payoff(xf.data());
      if (level > 0) diff -= model.payoff(xc.data());
      if (!std::isfinite(diff)) bad[static_cast<std::size_t>(b)] = 1;
      s += diff;
      s2 += diff * diff;
    }
    bsum[static_cast<std::size_t>(b)] = s;
    bsq[static_cast<std::size_t>(b)] = s2;
  });
  check_all_finite(bad, "estimate_mlmc");

  const Moments mo = reduce_blocks(n, bsum, bsq);
  *out_sum = mo.sum;
  *out_sumsq = mo.sumsq;
}

}  // namespace

MlmcLevelStats mlmc_level_stats(const SdeModel& model, int M, int level,
                                std::int64_t n_paths, std::uint64_t seed,
                                int threads) {
  require(M >= 2, ErrorKind::config,
          "mlmc_level_stats: refinement factor must be at least 2");
  require(level >= 0, ErrorKind::config,
          "mlmc_level_stats: level must be non-negative");
  require(n_paths >= 2, ErrorKind::config,
          "mlmc_level_stats: need at least two paths");
  Moments mo;
  mo.n = n_paths;
  mlmc_level_sums(model, M, level, n_paths, seed, threads, &mo.sum,
                  &mo.sumsq);
  return {mo.mean(), mo.variance()};
}

ExperimentResult estimate_mlmc(const SdeModel& model, double epsilon, int M,
                               std::int64_t initial_paths, std::uint64_t seed,
                               int threads) {
  require(epsilon > 0.0, ErrorKind::config,
          "estimate_mlmc: target precision must be positive");
  require(M >= 2, ErrorKind::config,
          "estimate_mlmc: refinement factor must be at least 2");
  require(initial_paths >= 2, ErrorKind::config,
          "estimate_mlmc: need at least two initial paths per level");
  Timer timer;

  constexpr int kMaxLevel = 12;
  int top = 2;
  std::vector<Moments> lev(static_cast<std::size_t>(top) + 1);
  std::vector<std::int64_t> target(static_cast<std::size_t>(top) + 1,
                                   initial_paths);

  const auto level_cost = [&](int l) {
    return static_cast<double>(ipow64(M, l) +
                               (l > 0 ? ipow64(M, l - 1) : 0));
  };

  for (int guard = 0;; ++guard) {
    require(guard < 1000, ErrorKind::accuracy,
            "estimate_mlmc: path allocation failed to converge");
    for (int l = 0; l <= top; ++l) {
      const std::size_t ul = static_cast<std::size_t>(l);
      if (lev[ul].n < target[ul]) {
        // recompute the whole level so results never depend on the growth
        // history
        Moments mo;
        mo.n = target[ul];
        mlmc_level_sums(model, M, l, target[ul], seed, threads, &mo.sum,
                        &mo.sumsq);
        lev[ul] = mo;
      }
    }

    double weight_sum = 0.0;
    for (int l = 0; l <= top; ++l)
      weight_sum += std::sqrt(lev[static_cast<std::size_t>(l)].variance() *
                              level_cost(l));
    bool grew = false;
    for (int l = 0; l <= top; ++l) {
      const std::size_t ul = static_cast<std::size_t>(l);
      const double want_real = 2.0 / (epsilon * epsilon) *
                               std::sqrt(lev[ul].variance() / level_cost(l)) *
                               weight_sum;
      const std::int64_t want = ceil_count(want_real);
      if (want > target[ul]) {
        target[ul] = want;
        grew = true;
      }
    }
    if (grew) continue;

    const double y_top = std::abs(lev[static_cast<std::size_t>(top)].mean());
    const double y_prev =
        std::abs(lev[static_cast<std::size_t>(top) - 1].mean()) /
        static_cast<double>(M);
    const double bias = std::max(y_top, y_prev) / static_cast<double>(M - 1);
    if (bias <= epsilon / std::sqrt(2.0)) break;

    ++top;
    require(top <= kMaxLevel, ErrorKind::accuracy,
            "estimate_mlmc: bias target unreachable within " +
                std::to_string(kMaxLevel) + " levels");
    lev.emplace_back();
    target.push_back(initial_paths);
  }

  ExperimentResult r;
  r.method = Method::mlmc;
  r.epsilon = epsilon;
  std::int64_t total = 0;
  for (int l = 0; l <= top; ++l) {
    const Moments& mo = lev[static_cast<std::size_t>(l)];
    r.estimate += mo.mean();
    r.empirical_variance += mo.variance() / static_cast<double>(mo.n);
    total += mo.n;
  }
  r.J = ipow64(M, top);
  r.N0 = total;
  r.repetitions = 1;
  r.seed = seed;
  r.wall_seconds = timer.seconds();
  return r;
}

namespace {

/// Shared tail of the control-variate estimators: reduces f and f - M over
/// the testing bundle into an ExperimentResult.
ExperimentResult reduce_cv_run(const SdeModel& model,
                               const PathBundle& testing,
                               const std::vector<double>& mart,
                               std::int64_t n0, int threads) {
  const std::int64_t blocks = block_count(n0);
  std::vector<double> gsum(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> gsq(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> fsum(static_cast<std::size_t>(blocks), 0.0);
  std::vector<double> fsq(static_cast<std::size_t>(blocks), 0.0);
  std::vector<char> bad(static_cast<std::size_t>(blocks), 0);
  parallel_blocks(n0, threads,
                  [&](std::int64_t b, std::int64_t lo, std::int64_t hi) {
    double sg = 0.0, sg2 = 0.0, sf = 0.0, sf2 = 0.0;
    for (std::int64_t i = lo; i < hi; ++i) {
      const double f = model.payoff(testing.state(i, testing.steps));
      if (!std::isfinite(f)) bad[static_cast<std::size_t>(b)] = 1;
      const double g = f - mart[static_cast<std::size_t>(i)];
      sg += g;
      sg2 += g * g;
      sf += f;
      sf2 += f * f;
    }
    gsum[static_cast<std::size_t>(b)] = sg;
    gsq[static_cast<std::size_t>(b)] = sg2;
    fsum[static_cast<std::size_t>(b)] = sf;
    fsq[static_cast<std::size_t>(b)] = sf2;
  });
  check_all_finite(bad, "estimate_with_cv");

  const Moments g = reduce_blocks(n0, gsum, gsq);
  const Moments f = reduce_blocks(n0, fsum, fsq);
  const double var_g = g.variance();
  const double var_f = f.variance();

  ExperimentResult r;
  r.estimate = g.mean();
  r.empirical_variance = var_g / static_cast<double>(n0);
  if (var_f > 0.0)
    r.variance_ratio = var_g / var_f;
  else
    r.variance_ratio = var_g > 0.0 ? std::numeric_limits<double>::infinity()
                                   : 1.0;
  r.J = testing.steps;
  r.N0 = n0;
  r.repetitions = 1;
  r.seed = testing.master_seed;
  return r;
}

}  // namespace

ExperimentResult estimate_with_cv(const SdeModel& model,
                                  const SchemeSpec& spec, const CvModel& cv,
                                  std::int64_t n0, std::uint64_t seed,
                                  int threads) {
  require(n0 >= 2, ErrorKind::config,
          "estimate_with_cv: need at least two paths");
  Timer timer;

  const PathBundle testing =
      simulate_paths(model, spec, n0, seed, Phase::test, threads);
  const std::vector<double> mart = evaluate_cv_all(cv, model, testing, threads);

  ExperimentResult r = reduce_cv_run(model, testing, mart, n0, threads);
  r.method = cv.method == CvMethod::rcv ? Method::rcv : Method::rrcv;
  if (cv.basis.kind == BasisSpec::Kind::piecewise_poly) {
    r.Q = cv.basis.Q;
    r.R = cv.basis.R;
  }
  r.wall_seconds = timer.seconds();
  return r;
}

ExperimentResult estimate_exact_cv(const SdeModel& model, double sigma,
                                   const SchemeSpec& spec, std::int64_t n0,
                                   std::uint64_t seed, int threads) {
  require(n0 >= 2, ErrorKind::config,
          "estimate_exact_cv: need at least two paths");
  Timer timer;

  const PathBundle testing =
      simulate_paths(model, spec, n0, seed, Phase::test, threads);
  std::vector<double> mart(static_cast<std::size_t>(n0));
  parallel_blocks(n0, threads,
                  [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i)
      mart[static_cast<std::size_t>(i)] =
          exact_cv_motivating(sigma, model.x0[0], testing, i);
  });

  ExperimentResult r = reduce_cv_run(model, testing, mart, n0, threads);
  r.method = Method::rcv;
  r.wall_seconds = timer.seconds();
  return r;
}

ExperimentResult run_once(const SdeModel& model, const EstimatorConfig& cfg,
                          std::uint64_t seed) {
  Timer timer;
  ExperimentResult r;
  switch (cfg.method) {
    case Method::smc:
      r = estimate_smc(model, cfg.scheme, cfg.N0, seed, cfg.threads);
      break;
    case Method::mlmc:
      r = estimate_mlmc(model, cfg.epsilon, cfg.mlmc_M, cfg.mlmc_initial,
                        seed, cfg.threads);
      break;
    case Method::rcv:
    case Method::rrcv: {
      if (cfg.use_exact_cv) {
        r = estimate_exact_cv(model, cfg.exact_cv_sigma, cfg.scheme, cfg.N0,
                              seed, cfg.threads);
        r.method = cfg.method;
        break;
      }
      require(cfg.N >= 2, ErrorKind::config,
              "run_once: need at least two training paths");
      const PathBundle training = simulate_paths(
          model, cfg.scheme, cfg.N, seed, Phase::train, cfg.threads);
      CvFitOptions opts = cfg.cv_options;
      opts.threads = cfg.threads;
      const CvModel cv = cfg.method == Method::rcv
                             ? fit_rcv(training, model, cfg.basis, opts)
                             : fit_rrcv(training, model, cfg.basis, opts);
      r = estimate_with_cv(model, cfg.scheme, cv, cfg.N0, seed, cfg.threads);
      r.N = cfg.N;
      break;
    }
  }
  r.epsilon = cfg.epsilon;
  r.seed = seed;
  r.wall_seconds = timer.seconds();
  return r;
}

ExperimentResult run_repetitions(const SdeModel& model,
                                 const EstimatorConfig& cfg,
                                 std::int64_t reps,
                                 std::uint64_t master_seed) {
  require(reps >= 2, ErrorKind::config,
          "run_repetitions: need at least two repetitions");
  std::vector<ExperimentResult> results(static_cast<std::size_t>(reps));

  const int workers = resolve_threads(cfg.threads);
  if (workers > 1 && reps > 1) {
    // parallelise over repetitions; each repetition then runs single-threaded
    EstimatorConfig inner = cfg;
    inner.threads = 1;
    std::vector<std::thread> pool;
    std::atomic<std::int64_t> next{0};
    std::vector<std::string> failures(static_cast<std::size_t>(reps));
    const int nw = static_cast<int>(
        std::min<std::int64_t>(workers, reps));
    for (int wkr = 0; wkr < nw; ++wkr) {
      pool.emplace_back([&]() {
        for (;;) {
          const std::int64_t rix = next.fetch_add(1);
          if (rix >= reps) return;
          try {
            results[static_cast<std::size_t>(rix)] = run_once(
                model, inner, rep_seed(master_seed,
                                       static_cast<std::uint64_t>(rix)));
          } catch (const std::exception& e) {
            failures[static_cast<std::size_t>(rix)] = e.what();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& msg : failures)
      require(msg.empty(), ErrorKind::numerical, msg);
  } else {
    for (std::int64_t rix = 0; rix < reps; ++rix)
      results[static_cast<std::size_t>(rix)] = run_once(
          model, cfg, rep_seed(master_seed, static_cast<std::uint64_t>(rix)));
  }

  // reduce in repetition order
  ExperimentResult out = results[0];
  out.estimate = 0.0;
  out.empirical_variance = 0.0;
  out.variance_ratio = 0.0;
  out.wall_seconds = 0.0;
  for (const ExperimentResult& r : results) {
    out.estimate += r.estimate;
    out.empirical_variance += r.empirical_variance;
    out.variance_ratio += r.variance_ratio;
    out.wall_seconds += r.wall_seconds;
  }
  const double dr = static_cast<double>(reps);
  out.estimate /= dr;
  out.empirical_variance /= dr;
  out.variance_ratio /= dr;
  out.wall_seconds /= dr;  // seconds per repetition

  if (model.reference_value) {
    const double ref = *model.reference_value;
    double acc = 0.0;
    for (const ExperimentResult& r : results)
      acc += (r.estimate - ref) * (r.estimate - ref);
    out.empirical_rmse = std::sqrt(acc / dr);
    out.rmse_vs_reference = true;
  } else {
    double acc = 0.0;
    for (const ExperimentResult& r : results) {
      const double dev = r.estimate - out.estimate;
      acc += dev * dev;
    }
    out.empirical_rmse = reps > 1 ? std::sqrt(acc / (dr - 1.0)) : 0.0;
    out.rmse_vs_reference = false;
  }
  out.repetitions = reps;
  out.seed = master_seed;
  return out;
}

double fit_complexity_slope(
    const std::vector<std::pair<double, double>>& rmse_seconds) {
  require(rmse_seconds.size() >= 3, ErrorKind::config,
          "fit_complexity_slope: need at least three points");
  const std::size_t n = rmse_seconds.size();
  double mx = 0.0, my = 0.0;
  for (const auto& [rmse, secs] : rmse_seconds) {
    require(rmse > 0.0 && secs > 0.0, ErrorKind::config,
            "fit_complexity_slope: rmse and seconds must be positive");
    mx += std::log(rmse);
    my += std::log(secs);
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [rmse, secs] : rmse_seconds) {
    const double dx = std::log(rmse) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(secs) - my);
  }
  require(sxx > 0.0, ErrorKind::numerical,
          "fit_complexity_slope: rmse values are degenerate");
  return sxy / sxx;
}

}  // namespace weakcv

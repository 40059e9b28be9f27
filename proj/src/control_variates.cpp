#include "control_variates.hpp"

#include <algorithm>
#include <cmath>

namespace weakcv {

namespace {

void check_bundle(const PathBundle& b, const SdeModel& model,
                  Phase expected_phase, const char* who) {
  require(b.model_id == model.id, ErrorKind::contract,
          std::string(who) + ": bundle was simulated for model '" +
              b.model_id + "', got '" + model.id + "'");
  require(b.phase == phase_tag(expected_phase), ErrorKind::contract,
          std::string(who) + ": bundle phase tag mismatch (training and "
                             "testing paths must come from their own "
                             "seed phases)");
  require(b.n_paths > 0, ErrorKind::contract,
          std::string(who) + ": empty bundle");
  require(b.incr.size() == static_cast<std::size_t>(b.n_paths * b.steps) *
                               static_cast<std::size_t>(b.bytes_per_step()),
          ErrorKind::contract,
          std::string(who) + ": bundle increments missing or truncated");
}

bool resolve_truncate(const CvFitOptions& opts, const BasisSpec& basis) {
  if (opts.truncate) return *opts.truncate;
  return basis.kind == BasisSpec::Kind::piecewise_poly;
}

// gathers the step j-1 states of every path into a contiguous N x d block
std::vector<double> gather_states(const PathBundle& b, std::int64_t step) {
  std::vector<double> out(static_cast<std::size_t>(b.n_paths) *
                          static_cast<std::size_t>(b.d));
  for (std::int64_t i = 0; i < b.n_paths; ++i)
    std::copy(b.state(i, step), b.state(i, step) + b.d,
              out.begin() + static_cast<std::size_t>(i * b.d));
  return out;
}

}  // namespace

void CvModel::finalize() {
  outcomes = enumerate_outcomes(order, m, with_v);
  terms = cv_terms(order, m, with_v);
  for (auto& est : estimates)
    if (est.expo.empty()) est.rebuild_layout();
}

void CvModel::bind_model(const SdeModel& model) {
  require(model.id == model_id, ErrorKind::contract,
          "bind_model: control variate was fitted for model '" + model_id +
              "', got '" + model.id + "'");
  for (auto& est : estimates)
    if (est.basis.kind == BasisSpec::Kind::global_poly &&
        est.basis.include_payoff)
      est.bind_payoff(model.payoff);
}

std::vector<double> coefficients_from_q(const CvModel& cv,
                                        const SdeModel& model, std::int64_t j,
                                        const double* x, double dt) {
  require(cv.method == CvMethod::rrcv, ErrorKind::contract,
          "coefficients_from_q: needs an rrcv model");
  require(j >= 1 && j <= cv.steps, ErrorKind::contract,
          "coefficients_from_q: step index out of range");
  const std::size_t n_terms = cv.terms.size();
  std::vector<double> coeff(n_terms, 0.0);
  StepWorkspace w;
  w.prepare(model, x, cv.order);
  std::vector<double> next(static_cast<std::size_t>(model.d));
  for (const Outcome& o : cv.outcomes) {
    const std::int8_t* v = o.v.empty() ? nullptr : o.v.data();
    if (cv.order == 1)
      step_weak_euler(w, model, x, o.xi.data(), dt, next.data());
    else
      step_weak_taylor2(w, model, x, o.xi.data(), v, dt, next.data());
    const double q = j == cv.steps
                         ? model.payoff(next.data())
                         : cv.estimates[static_cast<std::size_t>(j)].evaluate(
                               next.data());
    const double pq = o.prob * q;
    for (std::size_t t = 0; t < n_terms; ++t)
      coeff[t] += pq * term_factor(cv.terms[t], cv.order, o.xi.data(), v);
  }
  return coeff;
}

CvModel fit_rcv(const PathBundle& training, const SdeModel& model,
                const BasisSpec& basis, const CvFitOptions& opts) {
  check_bundle(training, model, Phase::train, "fit_rcv");
  require(basis.d == model.d, ErrorKind::config,
          "fit_rcv: basis dimension does not match the model");
  CvModel cv;
  cv.method = CvMethod::rcv;
  cv.order = training.order;
  cv.steps = training.steps;
  cv.model_id = model.id;
  cv.m = training.m;
  cv.with_v = training.with_v;
  cv.basis = basis;
  cv.finalize();

  const std::int64_t N = training.n_paths;
  const std::int64_t J = training.steps;
  const std::size_t n_terms = cv.terms.size();

  // terminal payoffs, shared by every step
  std::vector<double> fT(static_cast<std::size_t>(N));
  const int threads = resolve_threads(opts.threads);
  parallel_blocks(N, threads,
                  [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t i = lo; i < hi; ++i) {
                      const double v = model.payoff(training.state(i, J));
                      require(std::isfinite(v), ErrorKind::numerical,
                              "fit_rcv: payoff not finite on a terminal "
                              "state");
                      fT[static_cast<std::size_t>(i)] = v;
                    }
                  });

  cv.estimates.reserve(static_cast<std::size_t>(J) * n_terms);
  double max_abs_response = 0.0;
  std::vector<std::vector<double>> responses(
      n_terms, std::vector<double>(static_cast<std::size_t>(N)));
  std::vector<double> xi(static_cast<std::size_t>(training.m));
  std::vector<std::int8_t> vbits(
      static_cast<std::size_t>(pair_count(training.m)));
  for (std::int64_t j = 1; j <= J; ++j) {
    const std::vector<double> states = gather_states(training, j - 1);
    for (std::int64_t i = 0; i < N; ++i) {
      training.decode_increment(i, j - 1, xi.data(), vbits.data());
      const std::int8_t* v = training.with_v ? vbits.data() : nullptr;
      for (std::size_t t = 0; t < n_terms; ++t) {
        const double r = fT[static_cast<std::size_t>(i)] *
                         term_factor(cv.terms[t], cv.order, xi.data(), v);
        responses[t][static_cast<std::size_t>(i)] = r;
        max_abs_response = std::max(max_abs_response, std::abs(r));
      }
    }
    auto fits = fit_multi(states, responses, basis, model.payoff, threads);
    for (auto& est : fits) cv.estimates.push_back(std::move(est));
  }

  cv.truncation.enabled = resolve_truncate(opts, basis);
  cv.truncation.data_driven = !opts.A.has_value();
  cv.truncation.A = opts.A.value_or(2.0 * max_abs_response);
  if (cv.truncation.enabled) {
    const double level = cv.truncation.A * std::sqrt(training.dt);
    for (auto& est : cv.estimates) est.truncation_level = level;
  }
  return cv;
}

CvModel fit_rrcv(const PathBundle& training, const SdeModel& model,
                 const BasisSpec& basis, const CvFitOptions& opts) {
  check_bundle(training, model, Phase::train, "fit_rrcv");
  require(basis.d == model.d, ErrorKind::config,
          "fit_rrcv: basis dimension does not match the model");
  CvModel cv;
  cv.method = CvMethod::rrcv;
  cv.order = training.order;
  cv.steps = training.steps;
  cv.model_id = model.id;
  cv.m = training.m;
  cv.with_v = training.with_v;
  cv.basis = basis;
  cv.finalize();

  const std::int64_t N = training.n_paths;
  const std::int64_t J = training.steps;
  const int threads = resolve_threads(opts.threads);

  // responses start as exact terminal payoffs (q_J = f)
  std::vector<double> responses(static_cast<std::size_t>(N));
  double max_abs = 0.0;
  for (std::int64_t i = 0; i < N; ++i) {
    const double v = model.payoff(training.state(i, J));
    require(std::isfinite(v), ErrorKind::numerical,
            "fit_rrcv: payoff not finite on a terminal state");
    responses[static_cast<std::size_t>(i)] = v;
    max_abs = std::max(max_abs, std::abs(v));
  }

  cv.truncation.enabled = resolve_truncate(opts, basis);
  cv.truncation.data_driven = !opts.A.has_value();
  cv.truncation.A = opts.A.value_or(2.0 * max_abs);

  cv.estimates.resize(static_cast<std::size_t>(J));
  for (std::int64_t j = J; j >= 1; --j) {
    const std::vector<double> states = gather_states(training, j - 1);
    RegressionEstimate est =
        fit(states, responses, basis, model.payoff,
            cv.truncation.enabled ? std::optional<double>(cv.truncation.A)
                                  : std::nullopt);
    cv.estimates[static_cast<std::size_t>(j - 1)] = std::move(est);
    if (j > 1) {
      // next responses: the just-fitted (possibly clamped) q at X_{j-1}
      const RegressionEstimate& q =
          cv.estimates[static_cast<std::size_t>(j - 1)];
      parallel_blocks(N, threads,
                      [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
                        for (std::int64_t i = lo; i < hi; ++i)
                          responses[static_cast<std::size_t>(i)] = q.evaluate(
                              states.data() +
                              static_cast<std::size_t>(i * training.d));
                      });
    }
  }
  return cv;
}

double evaluate_cv(const CvModel& cv, const SdeModel& model,
                   const PathBundle& testing, std::int64_t path_index) {
  check_bundle(testing, model, Phase::test, "evaluate_cv");
  require(path_index >= 0 && path_index < testing.n_paths,
          ErrorKind::contract, "evaluate_cv: path index out of range");
  require(testing.order == cv.order && testing.steps == cv.steps &&
              testing.with_v == cv.with_v,
          ErrorKind::contract,
          "evaluate_cv: bundle scheme does not match the control variate");

  const std::int64_t J = cv.steps;
  const int d = model.d;
  double M = 0.0;
  if (cv.method == CvMethod::rcv) {
    const std::size_t n_terms = cv.terms.size();
    thread_local std::vector<double> xi;
    thread_local std::vector<std::int8_t> vbits;
    xi.resize(static_cast<std::size_t>(testing.m));
    vbits.resize(static_cast<std::size_t>(pair_count(testing.m)));
    for (std::int64_t j = 1; j <= J; ++j) {
      const double* x = testing.state(path_index, j - 1);
      testing.decode_increment(path_index, j - 1, xi.data(), vbits.data());
      const std::int8_t* v = testing.with_v ? vbits.data() : nullptr;
      for (std::size_t t = 0; t < n_terms; ++t)
        M += cv.estimates[static_cast<std::size_t>(j - 1) * n_terms + t]
                 .evaluate(x) *
             term_factor(cv.terms[t], cv.order, xi.data(), v);
    }
    return M;
  }

  // rrcv: per step, q at the realised next state minus the one-step mean
  thread_local std::vector<double> next;
  next.resize(static_cast<std::size_t>(d));
  StepWorkspace w;
  for (std::int64_t j = 1; j <= J; ++j) {
    const double* x = testing.state(path_index, j - 1);
    const double* xnext = testing.state(path_index, j);
    const auto q_at = [&](const double* y) {
      return j == J ? model.payoff(y)
                    : cv.estimates[static_cast<std::size_t>(j)].evaluate(y);
    };
    w.prepare(model, x, cv.order);
    double mean = 0.0;
    for (const Outcome& o : cv.outcomes) {
      const std::int8_t* v = o.v.empty() ? nullptr : o.v.data();
      if (cv.order == 1)
        step_weak_euler(w, model, x, o.xi.data(), testing.dt, next.data());
      else
        step_weak_taylor2(w, model, x, o.xi.data(), v, testing.dt,
                          next.data());
      mean += o.prob * q_at(next.data());
    }
    M += q_at(xnext) - mean;
  }
  return M;
}

std::vector<double> evaluate_cv_all(const CvModel& cv, const SdeModel& model,
                                    const PathBundle& testing, int threads) {
  std::vector<double> out(static_cast<std::size_t>(testing.n_paths));
  parallel_blocks(testing.n_paths, resolve_threads(threads),
                  [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
                    for (std::int64_t i = lo; i < hi; ++i)
                      out[static_cast<std::size_t>(i)] =
                          evaluate_cv(cv, model, testing, i);
                  });
  return out;
}

double exact_cv_motivating(double sigma, double x0, const PathBundle& paths,
                           std::int64_t path_index) {
  require(paths.model_id == "motivating" && paths.order == 1 &&
              paths.d == 1 && paths.m == 1,
          ErrorKind::contract,
          "exact_cv_motivating: needs order-1 paths of the motivating model");
  require(path_index >= 0 && path_index < paths.n_paths, ErrorKind::contract,
          "exact_cv_motivating: path index out of range");
  (void)x0;
  const double dt = paths.dt;
  const double sdt = std::sqrt(dt);
  const double growth = 1.0 + sigma * sigma * dt;
  double M = 0.0;
  double y = 0.0;
  std::int8_t vdummy = 0;
  for (std::int64_t j = 1; j <= paths.steps; ++j) {
    paths.decode_increment(path_index, j - 1, &y, &vdummy);
    const double x = paths.state(path_index, j - 1)[0];
    const double decay =
        std::pow(growth, static_cast<double>(paths.steps - j));
    const double a1 = 2.0 * sigma * sdt * x * x * decay;
    const double a2 = std::sqrt(2.0) * sigma * sigma * dt * x * x * decay;
    M += a1 * hermite(1, y) + a2 * hermite(2, y);
  }
  return M;
}

}  // namespace weakcv

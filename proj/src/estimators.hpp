#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "control_variates.hpp"
#include "models.hpp"
#include "schemes.hpp"

namespace weakcv {

enum class Method { smc, mlmc, rcv, rrcv };

std::string method_name(Method m);
Method method_from_name(const std::string& name);  // config error if unknown

/// Inputs of the closed-form parameter rules. nu = infinity selects the
/// limiting exponents (the regime used by the benchmark experiments).
struct ComplexityParams {
  Method method = Method::rrcv;
  double epsilon = 1.0 / 16.0;
  int p = 3;
  int d = 1;
  double nu = std::numeric_limits<double>::infinity();
  // multiplicative prefactors; c_N/c_N0 <= 0 picks the dimension-keyed
  // defaults from the benchmark setup
  double c_J = 1.0;
  double c_N = 0.0;
  double c_N0 = 0.0;
  double c_Q = 1.0;
  double c_R = 1.0;
};

/// Exponents of the parameter rules: parameter ~ eps^-exponent. Valid for
/// rcv/rrcv; nu may be infinite. All are continuous in nu.
double n_exponent(Method method, int d, int p, double nu);
double q_exponent(Method method, int d, int p, double nu);
double r_exponent(Method method, int d, int p, double nu);

/// Cost growth: smc 2.5, mlmc 2.0 (second-order scheme baselines), rcv and
/// rrcv from the closed forms (log factors ignored).
double complexity_exponent(Method method, int d, int p, double nu);

/// Limit of the rcv/rrcv complexity exponent as p and nu grow: 14/8.
constexpr double kComplexityExponentLimit = 1.75;

struct ChosenParameters {
  std::int64_t J = 1;
  std::int64_t N = 0;   // training paths (rcv/rrcv)
  std::int64_t N0 = 0;  // testing or plain Monte Carlo paths
  std::int64_t Q = 1;
  double R = 1.0;
  std::int64_t mlmc_initial = 0;
  int mlmc_M = 4;
  std::vector<std::string> warnings;  // theoretical-regime violations
};

/// Evaluates the parameter rules: J = ceil(c_J eps^-1/2), N and N0 from the
/// n-exponent with the prefactor outside the ceiling, Q and R from their
/// exponents (piecewise mode only). Violating p > (d-2)/2 or
/// nu > 2d(p+1)/(2(p+1)-d) produces warnings, not errors.
ChosenParameters choose_parameters(const ComplexityParams& cp);

struct ExperimentResult {
  Method method = Method::smc;
  double epsilon = 0.0;
  double estimate = 0.0;
  double empirical_rmse = 0.0;
  bool rmse_vs_reference = false;  // spread-only when no reference exists
  double empirical_variance = 0.0;  // estimator variance (sample var / N)
  double variance_ratio = 0.0;  // Var[f - M] / Var[f]; 1 for smc, 0 for mlmc
  double wall_seconds = 0.0;
  std::int64_t J = 0;
  std::int64_t N = 0;
  std::int64_t N0 = 0;
  std::int64_t Q = 0;
  double R = 0.0;
  std::int64_t repetitions = 1;
  std::uint64_t seed = 0;
};

/// Plain Monte Carlo over N0 scheme paths, streamed (no path storage).
/// Draws are keyed exactly like a testing bundle with the same seed.
ExperimentResult estimate_smc(const SdeModel& model, const SchemeSpec& spec,
                              std::int64_t n0, std::uint64_t seed,
                              int threads = 0);

/// Geometric multilevel Monte Carlo on the Euler-Maruyama scheme with
/// Gaussian increments: level l uses M^l steps, coarse increments are sums
/// of fine ones, levels are added until the extrapolated bias estimate
/// max(|Y_{L-1}|/M, |Y_L|)/(M-1) drops below eps/sqrt(2), and
/// N_l = ceil(2 eps^-2 sqrt(V_l/C_l) sum_k sqrt(V_k C_k)). More than 12
/// levels is an accuracy error.
ExperimentResult estimate_mlmc(const SdeModel& model, double epsilon, int M,
                               std::int64_t initial_paths, std::uint64_t seed,
                               int threads = 0);

/// Mean and sample variance of the level-l coupled difference
/// f(fine) - f(coarse) (level 0: just f) over n_paths paths. Diagnostic for
/// the level-variance decay of the multilevel estimator.
struct MlmcLevelStats {
  double mean = 0.0;
  double variance = 0.0;
};

MlmcLevelStats mlmc_level_stats(const SdeModel& model, int M, int level,
                                std::int64_t n_paths, std::uint64_t seed,
                                int threads = 0);

/// Mean of f(X_T) - M over a fresh testing bundle of N0 paths; reports the
/// controlled variance and the raw payoff variance for the reduction ratio.
ExperimentResult estimate_with_cv(const SdeModel& model,
                                  const SchemeSpec& spec, const CvModel& cv,
                                  std::int64_t n0, std::uint64_t seed,
                                  int threads = 0);

/// Like estimate_with_cv, but with the closed-form coefficients of the
/// motivating model dX = sigma X dW under the order-1 scheme; the control
/// variate is then perfect and the estimate equals x0^2 (1+sigma^2 dt)^J on
/// every path.
ExperimentResult estimate_exact_cv(const SdeModel& model, double sigma,
                                   const SchemeSpec& spec, std::int64_t n0,
                                   std::uint64_t seed, int threads = 0);

/// One full pipeline description; run_once executes it for one seed.
struct EstimatorConfig {
  Method method = Method::rrcv;
  SchemeSpec scheme;
  double epsilon = 0.0;  // context for mlmc stopping and reporting
  std::int64_t N = 0;    // training paths (rcv/rrcv)
  std::int64_t N0 = 0;
  BasisSpec basis;
  CvFitOptions cv_options;
  std::int64_t mlmc_initial = 1000;
  int mlmc_M = 4;
  int threads = 0;
  // motivating model, order-1 scheme only: use the closed-form coefficients
  // instead of fitting (the control variate is then perfect)
  bool use_exact_cv = false;
  double exact_cv_sigma = 1.0;
};

ExperimentResult run_once(const SdeModel& model, const EstimatorConfig& cfg,
                          std::uint64_t seed);

/// reps independent pipelines with seeds derived from the master seed.
/// empirical_rmse is taken against the model reference when it exists,
/// otherwise it is the spread of the repetition estimates. Results are
/// reduced in repetition order, so the output is independent of the thread
/// count.
ExperimentResult run_repetitions(const SdeModel& model,
                                 const EstimatorConfig& cfg,
                                 std::int64_t reps,
                                 std::uint64_t master_seed);

/// OLS slope of log(seconds) on log(rmse). Degenerate abscissae (all rmse
/// equal) are a numerical error; needs at least 3 points.
double fit_complexity_slope(
    const std::vector<std::pair<double, double>>& rmse_seconds);

}  // namespace weakcv

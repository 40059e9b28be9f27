#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "models.hpp"
#include "regression.hpp"
#include "schemes.hpp"
#include "stochastics.hpp"

namespace weakcv {

enum class CvMethod { rcv, rrcv };

/// How fitted functions were clamped. RCV clamps each coefficient estimate
/// at A*sqrt(dt); RRCV clamps every q estimate at the constant A. The
/// default A is data driven: twice the largest |response| seen in training.
struct TruncationPolicy {
  bool enabled = false;
  double A = 0.0;
  bool data_driven = true;
};

/// Fitted control variate.
///   rcv: estimates[(j-1)*terms.size() + t] approximates the coefficient
///        function a_{j,t}, j = 1..J.
///   rrcv: estimates[j] approximates q_j (the conditional expectation of
///         the payoff given the state at grid index j) for j = 0..J-1;
///         q_J is the payoff itself and is never fitted.
struct CvModel {
  CvMethod method = CvMethod::rrcv;
  int order = 2;
  std::int64_t steps = 1;
  std::string model_id;
  int m = 1;  // driving dimension of the training scheme
  bool with_v = false;
  BasisSpec basis;
  TruncationPolicy truncation;
  std::vector<RegressionEstimate> estimates;

  // derived tables, rebuilt by finalize() after fitting or deserialising
  std::vector<Outcome> outcomes;
  std::vector<CvTerm> terms;

  void finalize();
  /// Rebinds payoff-dependent pieces after deserialisation; checks the id.
  void bind_model(const SdeModel& model);
};

struct CvFitOptions {
  // unset: truncation on for piecewise bases, off for global ones
  std::optional<bool> truncate;
  std::optional<double> A;  // override for the data-driven constant
  int threads = 0;
};

/// Fits a_{j,t} by regressing f(X_T) * term_factor(t, increment_j) on the
/// step j-1 state, one shared factorisation per step.
CvModel fit_rcv(const PathBundle& training, const SdeModel& model,
                const BasisSpec& basis, const CvFitOptions& opts = {});

/// Backward recursion: q_J = payoff exactly, then regress q_{j}(X_j) on
/// X_{j-1} down to q_0.
CvModel fit_rrcv(const PathBundle& training, const SdeModel& model,
                 const BasisSpec& basis, const CvFitOptions& opts = {});

/// Exact per-term coefficients of an rrcv model at state x for step j
/// (1-based): for every term t the finite sum over the one-step outcome law
/// of weight * factor_t * q_j(step(x, outcome)).
std::vector<double> coefficients_from_q(const CvModel& cv,
                                        const SdeModel& model, std::int64_t j,
                                        const double* x, double dt);

/// Martingale transform of one testing path:
///   M = sum_j sum_t coeff_{j,t}(X_{j-1}) * factor_t(increment_j).
/// rcv reads the fitted coefficient estimates; rrcv contracts the exact
/// one-step sums of coefficients_from_q against the realised factors, which
/// collapses (the factor system together with the constant is a complete
/// orthonormal system on the outcome space) to
///   q_j(X_j) - E[q_j(step(X_{j-1}, .))],
/// evaluated with the stored next state, so each step costs one outcome
/// sweep instead of a full coefficient table.
double evaluate_cv(const CvModel& cv, const SdeModel& model,
                   const PathBundle& testing, std::int64_t path_index);

/// evaluate_cv for every path, parallel over fixed blocks.
std::vector<double> evaluate_cv_all(const CvModel& cv, const SdeModel& model,
                                    const PathBundle& testing,
                                    int threads = 0);

/// Closed-form control variate for dX = sigma X dW under the order-1
/// scheme, using
///   a_{j,1}(y) = 2 sigma sqrt(dt) y^2 (1+sigma^2 dt)^{J-j},
///   a_{j,2}(y) = sqrt(2) sigma^2 dt y^2 (1+sigma^2 dt)^{J-j}.
/// f(X_T) - M equals x0^2 (1+sigma^2 dt)^J on every path.
double exact_cv_motivating(double sigma, double x0, const PathBundle& paths,
                           std::int64_t path_index);

}  // namespace weakcv

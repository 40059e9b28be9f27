#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "models.hpp"
#include "schemes.hpp"
#include "stochastics.hpp"

namespace weakcv {

/// True when the full outcome tree (outcomes per step to the power J) fits
/// under the enumeration cap.
bool enumeration_in_cap(const SdeModel& model, const SchemeSpec& spec);

/// E[g(X_T)] over the exact law of the discretised chain (default payoff).
/// Resource error when out of cap.
double exact_discrete_expectation(
    const SdeModel& model, const SchemeSpec& spec,
    const std::function<double(const double*)>& g = {});

/// q_j(x) = E[f(X_T) | X at grid index j equals x], by depth-first
/// enumeration of the remaining J - j steps. j ranges over 0..J.
double exact_q(const SdeModel& model, const SchemeSpec& spec, std::int64_t j,
               const double* x);

/// Coefficient of term `t` at (1-based) step j given the step j-1 state x:
///   a_{j,t}(x) = E[f(X_T) factor_t(increment_j) | X_{(j-1)dt} = x].
/// `direct` enumerates all remaining steps in one pass; `onestep` applies
/// the single-step weighted sum over exact_q at the propagated states. The
/// two must agree to enumeration roundoff.
double exact_coefficient_direct(const SdeModel& model, const SchemeSpec& spec,
                                std::int64_t j, const CvTerm& t,
                                const double* x);
double exact_coefficient_onestep(const SdeModel& model,
                                 const SchemeSpec& spec, std::int64_t j,
                                 const CvTerm& t, const double* x);

/// Max residual of the exact discrete representation
///   f(X_T) - E f - sum_j sum_t a_{j,t}(X_{j-1}) factor_t(increment_j)
/// over every enumerable path, with all coefficients computed exactly.
double verify_representation(const SdeModel& model, const SchemeSpec& spec);

/// Closed-form control variate for dX = sigma X dW under the order-1 scheme:
/// the chaos expansion terminates at Hermite order two with
///   a_{j,1}(y) = 2 sigma sqrt(dt) y^2 (1 + sigma^2 dt)^{J-j},
///   a_{j,2}(y) = sqrt(2) sigma^2 dt y^2 (1 + sigma^2 dt)^{J-j}.
/// Returns the max over paths of |f(X_J) - x0^2 (1+sigma^2 dt)^J - M|.
double verify_motivating_closed_form(double sigma, double x0, double horizon,
                                     std::int64_t steps);

/// Every enumerable path packed as a bundle (states + encoded increments)
/// plus each path's probability, in canonical outcome-odometer order with
/// the first step most significant. The phase tag is caller-chosen so the
/// bundle can stand in for training or testing paths in exact identities.
std::pair<PathBundle, std::vector<double>> enumerate_bundle(
    const SdeModel& model, const SchemeSpec& spec, Phase phase);

struct VerifyRow {
  std::string model;
  int order;
  std::int64_t steps;
  double residual;
};

/// The standard residual suite: representation residuals for the builtin 1D
/// models and the two-driver fixture at orders 1 and 2, J = 1..max_steps,
/// plus the closed-form motivating check.
std::vector<VerifyRow> verify_suite(std::int64_t max_steps = 3);

}  // namespace weakcv

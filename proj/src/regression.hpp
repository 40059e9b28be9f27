#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "common.hpp"

namespace weakcv {

/// Basis family for least-squares fits of functions of the state.
struct BasisSpec {
  enum class Kind { global_poly, piecewise_poly };

  Kind kind = Kind::global_poly;
  int p = 3;                   // max total degree
  bool include_payoff = true;  // global only: payoff as an extra regressor
  int Q = 1;                   // piecewise: cubes per axis
  double R = 1.0;              // piecewise: domain half-width
  int d = 1;

  void validate() const;
};

/// C(p+d, d), the number of monomials of total degree <= p in d variables.
std::int64_t monomial_count(int p, int d);

/// Total coefficient count: global C(p+d,d) (+1 with payoff),
/// piecewise Q^d * C(p+d,d).
std::int64_t basis_size(const BasisSpec& basis);

/// Exponent tuples of the monomial basis, graded lexicographic (degree 0
/// first, ties broken lexicographically). The coefficient layout of every
/// estimate follows this order.
std::vector<std::vector<int>> monomial_exponents(int p, int d);

/// Fitted least-squares estimate. Coefficients live in a standardised
/// frame: global monomials take (x - center) / scale per coordinate with
/// center/scale the training mean/sd; piecewise monomials take
/// (x - cube_center) / cube_halfwidth. The payoff column, when present, is
/// the raw payoff value and its coefficient sits last.
struct RegressionEstimate {
  BasisSpec basis;
  // global: basis_size entries; piecewise: Q^d blocks of C(p+d,d) entries,
  // cube-major with cube index = sum_i idx_i * Q^(d-1-i)
  std::vector<double> coefficients;
  std::optional<double> truncation_level;
  std::vector<double> center;  // global frame; empty in piecewise mode
  std::vector<double> scale;
  bool underdetermined = false;  // fewer rows than columns somewhere
  std::int64_t rank = 0;         // retained singular directions (summed)

  // not serialised; rebind after loading when include_payoff is set
  std::function<double(const double*)> payoff;

  // cached monomial layout (monomial_count x d, flattened, graded lex);
  // rebuilt by fit and after deserialisation
  std::vector<int> expo;
  void rebuild_layout();

  /// Basis expansion at x. Piecewise: exactly 0 outside [-R,R]^d, cube
  /// located by floor arithmetic with ties to the lower cube. The
  /// truncation clamp is applied last.
  double evaluate(const double* x) const;
  double evaluate(const std::vector<double>& x) const;

  void bind_payoff(std::function<double(const double*)> f);
};

/// Cube index along one axis: t = (x + R) / (2R/Q), index ceil(t) - 1 with
/// exact-boundary points assigned to the lower cube, clamped to [0, Q-1].
/// Callers must reject |x| > R before asking for an index.
int cube_axis_index(double x, int Q, double R);

/// Least-squares fit of responses on the basis expansion of states
/// (row-major N x d). Solved through an orthogonal factorisation with
/// singular values below 1e-10 * (largest) discarded, giving the
/// minimum-norm solution. Piecewise mode solves each cube independently;
/// empty cubes keep zero coefficients (and are not flagged). Fewer rows
/// than columns in a solved system sets the underdetermined flag.
RegressionEstimate fit(const std::vector<double>& states,
                       const std::vector<double>& responses,
                       const BasisSpec& basis,
                       std::function<double(const double*)> payoff = {},
                       std::optional<double> truncation = {});

/// Same states, many response vectors: the design factorisation is built
/// once and reused for every column. Returns one estimate per response
/// vector, in order.
std::vector<RegressionEstimate> fit_multi(
    const std::vector<double>& states,
    const std::vector<std::vector<double>>& responses, const BasisSpec& basis,
    std::function<double(const double*)> payoff = {}, int threads = 0);

/// Mean squared deviation of the estimate from the provided truth sample.
double mse_against(const RegressionEstimate& est,
                   const std::vector<double>& states,
                   const std::vector<double>& truth);

}  // namespace weakcv

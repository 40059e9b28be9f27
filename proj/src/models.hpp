#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace weakcv {

/// Values of the operators
///   L0 g = sum_k mu^k d_k g + 1/2 sum_{k,l} (sigma sigma^T)^{kl} d^2_{kl} g
///   Lr g = sum_k sigma^{kr} d_k g
/// applied to every drift and diffusion component at one state. Layout:
///   l0mu[r]                   (d)
///   lkmu[k*d + r]             (m x d)
///   l0sigma[r*m + k]          (d x m)
///   lksigma[(k*d + r)*m + l]  (m x d x m)
struct SecondOrderData {
  std::vector<double> l0mu;
  std::vector<double> lkmu;
  std::vector<double> l0sigma;
  std::vector<double> lksigma;

  void resize(int d, int m) {
    l0mu.assign(static_cast<std::size_t>(d), 0.0);
    lkmu.assign(static_cast<std::size_t>(m) * d, 0.0);
    l0sigma.assign(static_cast<std::size_t>(d) * m, 0.0);
    lksigma.assign(static_cast<std::size_t>(m) * d * m, 0.0);
  }
};

/// A d-dimensional diffusion dX = mu(X) dt + sigma(X) dW with an
/// m-dimensional driver, a scalar payoff on the terminal state, and optional
/// analytic operator data for the second-order scheme.
struct SdeModel {
  std::string id;
  int d = 1;
  int m = 1;
  std::vector<double> x0;
  double horizon = 1.0;
  std::function<void(const double* x, double* out)> drift;      // out[d]
  std::function<void(const double* x, double* out)> diffusion;  // out[d*m], row major
  std::function<double(const double* x)> payoff;
  /// Optional analytic supplier; when absent scheme_derivatives falls back
  /// to central finite differences.
  std::function<void(const double* x, SecondOrderData&)> derivative_data;
  /// Set only when Lk sigma^{rl} == 0 identically for k != l; drops the V
  /// entries from the second-order term system and increment storage.
  bool zero_offdiag_lsigma = false;
  std::optional<double> reference_value;
};

/// True when the scheme/term system for this model carries V entries.
inline bool model_uses_v(const SdeModel& model, int order) {
  return order == 2 && model.m > 1 && !model.zero_offdiag_lsigma;
}

/// Builtin ids: "motivating", "arsinh1d", "fivedim". Unknown id is a
/// configuration error.
SdeModel builtin_model(const std::string& id);

/// The scalar dX = sigma X dW model with payoff x^2; requires sigma > 0.
SdeModel motivating_model(double sigma, double x0, double horizon);

/// Two-driver test model with non-vanishing Lk sigma^{rl} for k != l
/// (linear drift, affine diffusion); exercises the V part of the term
/// system. Not addressable through builtin_model.
SdeModel fixture_model_2d();

/// Operator data at x: analytic when the model supplies it, otherwise
/// central finite differences (step max(1,|x_i|) * eps^(1/3) for first
/// derivatives, max(1,|x_i|) * eps^(1/4) for second derivatives).
/// Non-finite results are a numerical error.
void scheme_derivatives(const SdeModel& model, const double* x,
                        SecondOrderData& out);

/// Expectation of g(W), W standard normal, by Gauss-Hermite quadrature with
/// node doubling from `nodes` until successive values agree to 1e-10.
/// Exceeding `node_cap` without convergence is an accuracy error.
double gauss_hermite_reference(const std::function<double(double)>& g,
                               int nodes, int node_cap = 512);

}  // namespace weakcv

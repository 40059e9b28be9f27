#include "weakcv/weakcv.h"

#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "common.hpp"
#include "control_variates.hpp"
#include "estimators.hpp"
#include "models.hpp"
#include "oracle.hpp"

namespace {

thread_local std::string g_last_error;

int status_of(weakcv::ErrorKind kind) {
  switch (kind) {
    case weakcv::ErrorKind::config:
      return WEAKCV_ERR_CONFIG;
    case weakcv::ErrorKind::accuracy:
      return WEAKCV_ERR_ACCURACY;
    case weakcv::ErrorKind::resource:
      return WEAKCV_ERR_RESOURCE;
    case weakcv::ErrorKind::contract:
    case weakcv::ErrorKind::numerical:
      return WEAKCV_ERR_INTERNAL;
  }
  return WEAKCV_ERR_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return WEAKCV_OK;
  } catch (const weakcv::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return WEAKCV_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return WEAKCV_ERR_INTERNAL;
  }
}

int fail_config(const char* msg) {
  g_last_error = msg;
  return WEAKCV_ERR_CONFIG;
}

weakcv::Method to_method(int code) {
  switch (code) {
    case WEAKCV_METHOD_SMC:
      return weakcv::Method::smc;
    case WEAKCV_METHOD_MLMC:
      return weakcv::Method::mlmc;
    case WEAKCV_METHOD_RCV:
      return weakcv::Method::rcv;
    case WEAKCV_METHOD_RRCV:
      return weakcv::Method::rrcv;
  }
  weakcv::raise(weakcv::ErrorKind::config,
                "unknown method code " + std::to_string(code));
}

int from_method(weakcv::Method m) {
  switch (m) {
    case weakcv::Method::smc:
      return WEAKCV_METHOD_SMC;
    case weakcv::Method::mlmc:
      return WEAKCV_METHOD_MLMC;
    case weakcv::Method::rcv:
      return WEAKCV_METHOD_RCV;
    case weakcv::Method::rrcv:
      return WEAKCV_METHOD_RRCV;
  }
  return WEAKCV_METHOD_SMC;
}

double resolve_nu(double nu) {
  return nu <= 0.0 ? std::numeric_limits<double>::infinity() : nu;
}

void fill_result(const weakcv::ExperimentResult& r, weakcv_result* out) {
  out->method = from_method(r.method);
  out->epsilon = r.epsilon;
  out->estimate = r.estimate;
  out->rmse = r.empirical_rmse;
  out->variance = r.empirical_variance;
  out->variance_ratio = r.variance_ratio;
  out->wall_seconds = r.wall_seconds;
  out->J = r.J;
  out->N = r.N;
  out->N0 = r.N0;
  out->Q = r.Q;
  out->R = r.R;
  out->repetitions = r.repetitions;
  out->seed = r.seed;
  out->rmse_vs_reference = r.rmse_vs_reference ? 1 : 0;
}

}  // namespace

struct weakcv_model {
  weakcv::SdeModel model;
  bool is_motivating = false;
  double sigma = 0.0;
};

extern "C" {

const char* weakcv_version(void) { return "0.1.0"; }

const char* weakcv_last_error(void) { return g_last_error.c_str(); }

int weakcv_model_builtin(const char* id, weakcv_model** out) {
  if (!id || !out) return fail_config("null argument");
  return guarded([&]() {
    auto* h = new weakcv_model;
    try {
      h->model = weakcv::builtin_model(id);
    } catch (...) {
      delete h;
      throw;
    }
    if (h->model.id == "motivating") {
      h->is_motivating = true;
      h->sigma = 1.0;  // the builtin uses sigma = x0 = horizon = 1
    }
    *out = h;
  });
}

int weakcv_model_motivating(double sigma, double x0, double horizon,
                            weakcv_model** out) {
  if (!out) return fail_config("null argument");
  return guarded([&]() {
    auto* h = new weakcv_model;
    try {
      h->model = weakcv::motivating_model(sigma, x0, horizon);
      h->is_motivating = true;
      h->sigma = sigma;
    } catch (...) {
      delete h;
      throw;
    }
    *out = h;
  });
}

int weakcv_model_custom(int d, int m, const double* x0, double horizon,
                        weakcv_vector_fn drift, weakcv_vector_fn diffusion,
                        weakcv_scalar_fn payoff, void* user,
                        int zero_offdiag_lsigma, int has_reference,
                        double reference, weakcv_model** out) {
  if (!out || !x0 || !drift || !diffusion || !payoff)
    return fail_config("null argument");
  return guarded([&]() {
    weakcv::require(d >= 1 && m >= 1, weakcv::ErrorKind::config,
                    "model dimensions must be at least 1");
    weakcv::require(horizon > 0.0, weakcv::ErrorKind::config,
                    "time horizon must be positive");
    auto* h = new weakcv_model;
    h->model.id = "custom";
    h->model.d = d;
    h->model.m = m;
    h->model.x0.assign(x0, x0 + d);
    h->model.horizon = horizon;
    h->model.drift = [drift, user](const double* x, double* o) {
      drift(x, o, user);
    };
    h->model.diffusion = [diffusion, user](const double* x, double* o) {
      diffusion(x, o, user);
    };
    h->model.payoff = [payoff, user](const double* x) {
      return payoff(x, user);
    };
    h->model.zero_offdiag_lsigma = zero_offdiag_lsigma != 0;
    if (has_reference) h->model.reference_value = reference;
    *out = h;
  });
}

void weakcv_model_free(weakcv_model* model) { delete model; }

int weakcv_model_dimension(const weakcv_model* model, int* d, int* m) {
  if (!model) return fail_config("null model");
  if (d) *d = model->model.d;
  if (m) *m = model->model.m;
  return WEAKCV_OK;
}

int weakcv_model_reference(const weakcv_model* model, int* has,
                           double* value) {
  if (!model) return fail_config("null model");
  const bool present = model->model.reference_value.has_value();
  if (has) *has = present ? 1 : 0;
  if (value) *value = present ? *model->model.reference_value : 0.0;
  return WEAKCV_OK;
}

int weakcv_model_horizon(const weakcv_model* model, double* horizon) {
  if (!model || !horizon) return fail_config("null argument");
  *horizon = model->model.horizon;
  return WEAKCV_OK;
}

void weakcv_run_params_init(weakcv_run_params* params) {
  if (!params) return;
  std::memset(params, 0, sizeof(*params));
  params->method = WEAKCV_METHOD_RRCV;
  params->order = 2;
  params->steps = 4;
  params->epsilon = 1.0 / 16.0;
  params->basis_kind = WEAKCV_BASIS_GLOBAL;
  params->p = 3;
  params->include_payoff = 1;
  params->q_cubes = 1;
  params->r_halfwidth = 1.0;
  params->truncate = -1;
  params->truncation_a = 0.0;
  params->mlmc_initial = 1000;
  params->mlmc_m = 4;
  params->reps = 1;
  params->seed = 1;
  params->threads = 0;
}

int weakcv_run(weakcv_model* model, const weakcv_run_params* params,
               weakcv_result* out) {
  if (!model || !params || !out) return fail_config("null argument");
  return guarded([&]() {
    weakcv::EstimatorConfig cfg;
    cfg.method = to_method(params->method);
    cfg.scheme.order = params->order;
    cfg.scheme.steps = params->steps;
    cfg.epsilon = params->epsilon;
    cfg.N = params->n_train;
    cfg.N0 = params->n_test;
    weakcv::require(
        params->basis_kind == WEAKCV_BASIS_GLOBAL ||
            params->basis_kind == WEAKCV_BASIS_PIECEWISE,
        weakcv::ErrorKind::config, "unknown basis kind code");
    cfg.basis.kind = params->basis_kind == WEAKCV_BASIS_GLOBAL
                         ? weakcv::BasisSpec::Kind::global_poly
                         : weakcv::BasisSpec::Kind::piecewise_poly;
    cfg.basis.p = params->p;
    cfg.basis.include_payoff = params->include_payoff != 0;
    weakcv::require(params->q_cubes <= 1000000, weakcv::ErrorKind::config,
                    "piecewise cube count per axis is implausibly large");
    cfg.basis.Q = static_cast<int>(params->q_cubes);
    cfg.basis.R = params->r_halfwidth;
    cfg.basis.d = model->model.d;
    if (params->truncate >= 0) cfg.cv_options.truncate = params->truncate != 0;
    if (params->truncation_a > 0.0) cfg.cv_options.A = params->truncation_a;
    cfg.mlmc_initial = params->mlmc_initial;
    cfg.mlmc_M = params->mlmc_m;
    cfg.threads = params->threads;
    if (params->use_exact_cv) {
      weakcv::require(model->is_motivating && params->order == 1,
                      weakcv::ErrorKind::config,
                      "closed-form coefficients exist only for the "
                      "motivating model under the order-1 scheme");
      weakcv::require(cfg.method == weakcv::Method::rcv ||
                          cfg.method == weakcv::Method::rrcv,
                      weakcv::ErrorKind::config,
                      "exact-cv applies to the control-variate methods");
      cfg.use_exact_cv = true;
      cfg.exact_cv_sigma = model->sigma;
    }

    weakcv::require(params->reps >= 1, weakcv::ErrorKind::config,
                    "repetition count must be at least 1");
    weakcv::ExperimentResult r;
    if (params->reps == 1)
      r = weakcv::run_once(model->model, cfg, params->seed);
    else
      r = weakcv::run_repetitions(model->model, cfg, params->reps,
                                  params->seed);
    fill_result(r, out);
  });
}

void weakcv_complexity_params_init(weakcv_complexity_params* params) {
  if (!params) return;
  std::memset(params, 0, sizeof(*params));
  params->method = WEAKCV_METHOD_RRCV;
  params->epsilon = 1.0 / 16.0;
  params->p = 3;
  params->d = 1;
  params->nu = 0.0;  // limit
  params->c_j = 1.0;
  params->c_q = 1.0;
  params->c_r = 1.0;
}

int weakcv_choose_parameters(const weakcv_complexity_params* params,
                             weakcv_parameters* out, char* warnings,
                             size_t warnings_len) {
  if (!params || !out) return fail_config("null argument");
  return guarded([&]() {
    weakcv::ComplexityParams cp;
    cp.method = to_method(params->method);
    cp.epsilon = params->epsilon;
    cp.p = params->p;
    cp.d = params->d;
    cp.nu = resolve_nu(params->nu);
    cp.c_J = params->c_j > 0.0 ? params->c_j : 1.0;
    cp.c_N = params->c_n;
    cp.c_N0 = params->c_n0;
    cp.c_Q = params->c_q > 0.0 ? params->c_q : 1.0;
    cp.c_R = params->c_r > 0.0 ? params->c_r : 1.0;
    const weakcv::ChosenParameters ch = weakcv::choose_parameters(cp);
    out->J = ch.J;
    out->N = ch.N;
    out->N0 = ch.N0;
    out->Q = ch.Q;
    out->R = ch.R;
    out->mlmc_initial = ch.mlmc_initial;
    out->mlmc_m = ch.mlmc_M;
    out->warning_count = static_cast<int>(ch.warnings.size());
    if (warnings && warnings_len > 0) {
      std::string joined;
      for (const std::string& w : ch.warnings) {
        if (!joined.empty()) joined += '\n';
        joined += w;
      }
      const size_t n = std::min(warnings_len - 1, joined.size());
      std::memcpy(warnings, joined.data(), n);
      warnings[n] = '\0';
    }
  });
}

int weakcv_exponent(int method, int which, int d, int p, double nu,
                    double* out) {
  if (!out) return fail_config("null argument");
  return guarded([&]() {
    const weakcv::Method m = to_method(method);
    const double v = resolve_nu(nu);
    switch (which) {
      case WEAKCV_EXPONENT_Q:
        *out = weakcv::q_exponent(m, d, p, v);
        return;
      case WEAKCV_EXPONENT_R:
        *out = weakcv::r_exponent(m, d, p, v);
        return;
      case WEAKCV_EXPONENT_N:
        *out = weakcv::n_exponent(m, d, p, v);
        return;
      case WEAKCV_EXPONENT_COST:
        *out = weakcv::complexity_exponent(m, d, p, v);
        return;
    }
    weakcv::raise(weakcv::ErrorKind::config,
                  "unknown exponent selector " + std::to_string(which));
  });
}

int weakcv_exact_expectation(weakcv_model* model, int order, int64_t steps,
                             double* out) {
  if (!model || !out) return fail_config("null argument");
  return guarded([&]() {
    *out = weakcv::exact_discrete_expectation(model->model,
                                              {order, steps});
  });
}

int weakcv_exact_feasible(weakcv_model* model, int order, int64_t steps,
                          int* out) {
  if (!model || !out) return fail_config("null argument");
  return guarded([&]() {
    *out = weakcv::enumeration_in_cap(model->model, {order, steps}) ? 1 : 0;
  });
}

int weakcv_verify_suite(int64_t max_steps, weakcv_verify_row_fn row,
                        void* user, double* max_residual) {
  return guarded([&]() {
    const std::vector<weakcv::VerifyRow> rows =
        weakcv::verify_suite(max_steps);
    double worst = 0.0;
    for (const weakcv::VerifyRow& r : rows) {
      worst = std::max(worst, r.residual);
      if (row) row(r.model.c_str(), r.order, r.steps, r.residual, user);
    }
    if (max_residual) *max_residual = worst;
  });
}

int weakcv_fit_slope(const double* rmse, const double* seconds, int64_t n,
                     double* out) {
  if (!rmse || !seconds || !out) return fail_config("null argument");
  return guarded([&]() {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(static_cast<std::size_t>(n));
    for (int64_t i = 0; i < n; ++i)
      pts.emplace_back(rmse[i], seconds[i]);
    *out = weakcv::fit_complexity_slope(pts);
  });
}

}  // extern "C"

/* weakcv - weak-scheme Monte Carlo with regression-based control variates.
 *
 * C interface of the shared library. All functions return a status code
 * (WEAKCV_OK on success); on failure weakcv_last_error() holds a
 * thread-local description of what went wrong. Handles are opaque and owned
 * by the caller through the matching _free function.
 */
#ifndef WEAKCV_H
#define WEAKCV_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* ------------------------------------------------------------- status -- */

#define WEAKCV_OK 0
#define WEAKCV_ERR_INTERNAL 1 /* library bug or API contract violation */
#define WEAKCV_ERR_CONFIG 2   /* invalid input or configuration */
#define WEAKCV_ERR_ACCURACY 3 /* a tolerance or convergence target failed */
#define WEAKCV_ERR_RESOURCE 4 /* memory or enumeration budget exceeded */

/* Version of the library, e.g. "0.1.0". */
const char* weakcv_version(void);

/* Message of the most recent failing call on this thread ("" if none). */
const char* weakcv_last_error(void);

/* ------------------------------------------------------------- models -- */

typedef struct weakcv_model weakcv_model;

/* Builtin model ids: "arsinh1d", "fivedim", "motivating". */
int weakcv_model_builtin(const char* id, weakcv_model** out);

/* The scalar model dX = sigma X dW, X_0 = x0, payoff x^2, with its exact
 * discrete expectation x0^2 (1 + sigma^2 dt)^J available in closed form. */
int weakcv_model_motivating(double sigma, double x0, double horizon,
                            weakcv_model** out);

/* User-supplied dynamics. `drift` fills out[0..d), `diffusion` fills the
 * row-major d*m matrix out[0..d*m), `payoff` maps the terminal state to a
 * scalar. `user` is passed through unchanged. Set zero_offdiag_lsigma only
 * if L^k sigma^{rl} vanishes identically for k != l (it drops the
 * antisymmetric V randomness from the order-2 scheme). Derivatives needed
 * by the order-2 scheme are taken by central finite differences. */
typedef void (*weakcv_vector_fn)(const double* x, double* out, void* user);
typedef double (*weakcv_scalar_fn)(const double* x, void* user);

int weakcv_model_custom(int d, int m, const double* x0, double horizon,
                        weakcv_vector_fn drift, weakcv_vector_fn diffusion,
                        weakcv_scalar_fn payoff, void* user,
                        int zero_offdiag_lsigma, int has_reference,
                        double reference, weakcv_model** out);

void weakcv_model_free(weakcv_model* model);

int weakcv_model_dimension(const weakcv_model* model, int* d, int* m);

/* *has is 0 when the model carries no reference expectation. */
int weakcv_model_reference(const weakcv_model* model, int* has,
                           double* value);

int weakcv_model_horizon(const weakcv_model* model, double* horizon);

/* ---------------------------------------------------------- estimation -- */

#define WEAKCV_METHOD_SMC 0
#define WEAKCV_METHOD_MLMC 1
#define WEAKCV_METHOD_RCV 2
#define WEAKCV_METHOD_RRCV 3

#define WEAKCV_BASIS_GLOBAL 0
#define WEAKCV_BASIS_PIECEWISE 1

typedef struct {
  int method;          /* WEAKCV_METHOD_* */
  int order;           /* scheme order, 1 or 2 */
  int64_t steps;       /* J, time steps */
  double epsilon;      /* mlmc target; reporting context otherwise */
  int64_t n_train;     /* training paths (rcv/rrcv) */
  int64_t n_test;      /* evaluation paths (smc/rcv/rrcv) */
  int basis_kind;      /* WEAKCV_BASIS_* */
  int p;               /* max polynomial degree */
  int include_payoff;  /* global basis: payoff as extra regressor */
  int64_t q_cubes;     /* piecewise: cubes per axis */
  double r_halfwidth;  /* piecewise: domain half-width */
  int truncate;        /* -1 default (on iff piecewise), 0 off, 1 on */
  double truncation_a; /* clamp constant; <= 0 uses the data-driven value */
  int64_t mlmc_initial;
  int mlmc_m;
  int64_t reps;  /* 1 = single run; >= 2 = repetition harness with RMSE */
  uint64_t seed;
  int threads; /* 0 = hardware concurrency */
  int use_exact_cv; /* motivating model, order 1: closed-form coefficients */
} weakcv_run_params;

/* Fills defaults: rrcv, order 2, J=4, global basis p=3 with payoff column,
 * single repetition, seed 1. */
void weakcv_run_params_init(weakcv_run_params* params);

typedef struct {
  int method;
  double epsilon;
  double estimate;
  double rmse;     /* repetition harness only; 0 for single runs */
  double variance; /* estimator variance (sample variance / paths) */
  double variance_ratio; /* Var[f - M] / Var[f]; 1 when no reduction */
  double wall_seconds;   /* per repetition */
  int64_t J, N, N0, Q;
  double R;
  int64_t repetitions;
  uint64_t seed;
  int rmse_vs_reference; /* 0: rmse is the spread of repetition estimates */
} weakcv_result;

int weakcv_run(weakcv_model* model, const weakcv_run_params* params,
               weakcv_result* out);

/* ------------------------------------------------- parameter selection -- */

typedef struct {
  int method;
  double epsilon;
  int p;
  int d;
  double nu;  /* tail exponent; <= 0 or INFINITY selects the nu->inf limit */
  double c_j, c_n, c_n0, c_q, c_r; /* <= 0 picks the benchmark defaults */
} weakcv_complexity_params;

void weakcv_complexity_params_init(weakcv_complexity_params* params);

typedef struct {
  int64_t J, N, N0, Q;
  double R;
  int64_t mlmc_initial;
  int mlmc_m;
  int warning_count; /* regime warnings; see the warnings buffer */
} weakcv_parameters;

/* warnings (may be NULL) receives up to warnings_len - 1 bytes of
 * newline-separated regime warnings. */
int weakcv_choose_parameters(const weakcv_complexity_params* params,
                             weakcv_parameters* out, char* warnings,
                             size_t warnings_len);

#define WEAKCV_EXPONENT_Q 0
#define WEAKCV_EXPONENT_R 1
#define WEAKCV_EXPONENT_N 2
#define WEAKCV_EXPONENT_COST 3

/* Closed-form exponent e such that the parameter grows like eps^-e.
 * method: rcv/rrcv for Q/R/N; any method for COST. nu as above. */
int weakcv_exponent(int method, int which, int d, int p, double nu,
                    double* out);

/* ------------------------------------------------------------- oracle -- */

/* Exact E[f(X_T)] of the discretised chain by full enumeration. Fails with
 * WEAKCV_ERR_RESOURCE when the outcome tree exceeds the enumeration cap;
 * weakcv_exact_feasible reports the cap check without failing. */
int weakcv_exact_expectation(weakcv_model* model, int order, int64_t steps,
                             double* out);
int weakcv_exact_feasible(weakcv_model* model, int order, int64_t steps,
                          int* out);

/* Runs the exact-representation residual suite (builtin models, orders 1
 * and 2, J = 1..max_steps). `row` (may be NULL) is invoked once per check;
 * *max_residual receives the largest residual seen. */
typedef void (*weakcv_verify_row_fn)(const char* model, int order,
                                     int64_t steps, double residual,
                                     void* user);
int weakcv_verify_suite(int64_t max_steps, weakcv_verify_row_fn row,
                        void* user, double* max_residual);

/* OLS slope of log(seconds) on log(rmse) over n >= 3 points. */
int weakcv_fit_slope(const double* rmse, const double* seconds, int64_t n,
                     double* out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* WEAKCV_H */

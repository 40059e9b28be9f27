#include "cli/run.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include <weakcv/weakcv.h>

namespace weakcv_cli {

namespace {

/// Library failure carrying the C API status (which doubles as exit code).
struct RunFailure {
  int status;
  std::string message;
};

void check(int status, const std::string& what) {
  if (status != WEAKCV_OK)
    throw RunFailure{status, what + ": " + weakcv_last_error()};
}

struct ModelHandle {
  weakcv_model* h = nullptr;
  ~ModelHandle() { weakcv_model_free(h); }
  ModelHandle() = default;
  ModelHandle(const ModelHandle&) = delete;
  ModelHandle& operator=(const ModelHandle&) = delete;
};

void open_model(const std::string& id, ModelHandle& model) {
  check(weakcv_model_builtin(id.c_str(), &model.h),
        "cannot create model '" + id + "'");
}

int method_code(const std::string& name) {
  if (name == "smc") return WEAKCV_METHOD_SMC;
  if (name == "mlmc") return WEAKCV_METHOD_MLMC;
  if (name == "rcv") return WEAKCV_METHOD_RCV;
  return WEAKCV_METHOD_RRCV;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One CSV line in the fixed schema.
struct Row {
  std::string method;
  double epsilon = 0.0;
  std::int64_t J = 0, N = 0, N0 = 0, Q = 0;
  double R = 0.0;
  double estimate = 0.0, rmse = 0.0, variance = 0.0, ratio = 0.0, wall = 0.0;
  std::int64_t reps = 0;
  std::uint64_t seed = 0;
};

constexpr const char* kCsvHeader =
    "method,epsilon,J,N,N0,Q,R,estimate,rmse,variance,var_reduction_ratio,"
    "wall_seconds,reps,seed";

std::string csv_text(const std::vector<Row>& rows) {
  std::ostringstream out;
  out << kCsvHeader << "\n";
  for (const Row& r : rows) {
    out << r.method << ',' << fmt(r.epsilon) << ',' << r.J << ',' << r.N
        << ',' << r.N0 << ',' << r.Q << ',' << fmt(r.R) << ','
        << fmt(r.estimate) << ',' << fmt(r.rmse) << ',' << fmt(r.variance)
        << ',' << fmt(r.ratio) << ',' << fmt(r.wall) << ',' << r.reps << ','
        << r.seed << "\n";
  }
  return out.str();
}

Row row_of(const std::string& method, const weakcv_result& res) {
  Row r;
  r.method = method;
  r.epsilon = res.epsilon;
  r.J = res.J;
  r.N = res.N;
  r.N0 = res.N0;
  r.Q = res.Q;
  r.R = res.R;
  r.estimate = res.estimate;
  r.rmse = res.rmse;
  r.variance = res.variance;
  r.ratio = res.variance_ratio;
  r.wall = res.wall_seconds;
  r.reps = res.repetitions;
  r.seed = res.seed;
  return r;
}

/// Writes through a temp file and renames, so a failed run leaves nothing.
void write_file(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out.good())
      throw RunFailure{WEAKCV_ERR_CONFIG, "cannot write '" + tmp + "'"};
    out << content;
    out.flush();
    if (!out.good()) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw RunFailure{WEAKCV_ERR_CONFIG, "write to '" + tmp + "' failed"};
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw RunFailure{WEAKCV_ERR_CONFIG,
                     "cannot move results into place at '" + path + "'"};
  }
}

void write_manifest(const std::string& command, const RunConfig& cfg) {
  std::ostringstream out;
  out << "# weakcv run manifest; rerun with: weakcv " << command
      << " --config <this file>\n";
  out << "version = " << weakcv_version() << "\n";
  out << "command = " << command << "\n";
  out << canonical_text(cfg);
  write_file(cfg.output + ".manifest", out.str());
}

void emit_gnuplot_script(const RunConfig& cfg) {
  std::ostringstream out;
  out << "# log-log complexity layout: wall-clock seconds against RMSE\n"
      << "set logscale xy\n"
      << "set xlabel 'RMSE'\n"
      << "set ylabel 'seconds per run'\n"
      << "set datafile separator ','\n"
      << "set key top right\n"
      << "plot ";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i) {
    if (i) out << ", \\\n     ";
    out << "'" << cfg.output << "' using (strcol(1) eq '" << cfg.methods[i]
        << "' ? $9 : NaN):12 with linespoints title '" << cfg.methods[i]
        << "'";
  }
  out << "\n";
  write_file(cfg.output + ".gnuplot", out.str());
}

/// Shared setup of a run-parameter block from config + chosen parameters.
weakcv_run_params make_params(const RunConfig& cfg, const std::string& method,
                              double epsilon, weakcv_model* model,
                              bool quiet_warnings) {
  int d = 1;
  check(weakcv_model_dimension(model, &d, nullptr), "model query");

  weakcv_complexity_params cp;
  weakcv_complexity_params_init(&cp);
  cp.method = method_code(method);
  cp.epsilon = epsilon;
  cp.p = cfg.p;
  cp.d = d;
  cp.nu = cfg.nu;
  cp.c_j = cfg.c_j;
  cp.c_n = cfg.c_n;
  cp.c_n0 = cfg.c_n0;
  cp.c_q = cfg.c_q;
  cp.c_r = cfg.c_r;
  weakcv_parameters chosen;
  char warn[1024] = {0};
  check(weakcv_choose_parameters(&cp, &chosen, warn, sizeof warn),
        "parameter selection");
  if (chosen.warning_count > 0 && !quiet_warnings)
    std::cerr << "warning: " << warn << "\n";

  weakcv_run_params rp;
  weakcv_run_params_init(&rp);
  rp.method = cp.method;
  rp.order = cfg.order;
  rp.steps = chosen.J > 0 ? chosen.J : 1;
  rp.epsilon = epsilon;
  rp.n_train = chosen.N;
  rp.n_test = chosen.N0;
  rp.basis_kind =
      cfg.basis == "piecewise" ? WEAKCV_BASIS_PIECEWISE : WEAKCV_BASIS_GLOBAL;
  rp.p = cfg.p;
  rp.include_payoff = 1;
  rp.q_cubes = cfg.q_cubes ? *cfg.q_cubes : chosen.Q;
  rp.r_halfwidth = cfg.r_halfwidth ? *cfg.r_halfwidth : chosen.R;
  rp.truncate = cfg.truncate == "auto" ? -1 : (cfg.truncate == "on" ? 1 : 0);
  rp.mlmc_initial = chosen.mlmc_initial > 0 ? chosen.mlmc_initial : 1000;
  rp.mlmc_m = chosen.mlmc_m > 0 ? chosen.mlmc_m : 4;
  rp.reps = cfg.resolved_reps();
  rp.seed = cfg.seed;
  rp.threads = cfg.threads;
  rp.use_exact_cv = cfg.exact_cv ? 1 : 0;
  return rp;
}

int cmd_estimate(const RunConfig& cfg) {
  if (cfg.methods.size() != 1)
    throw RunFailure{WEAKCV_ERR_CONFIG,
                     "estimate runs a single method; got a list"};
  ModelHandle model;
  open_model(cfg.model, model);
  const double epsilon =
      cfg.epsilons.empty() ? 1.0 / 16.0 : cfg.epsilons.front();

  weakcv_run_params rp = make_params(cfg, cfg.methods[0], epsilon, model.h,
                                     /*quiet_warnings=*/false);
  weakcv_result res;
  check(weakcv_run(model.h, &rp, &res), "estimation run");

  std::vector<Row> rows{row_of(cfg.methods[0], res)};
  write_file(cfg.output, csv_text(rows));
  write_manifest("estimate", cfg);

  std::cout << "estimate " << fmt(res.estimate);
  if (res.repetitions > 1)
    std::cout << "  rmse " << fmt(res.rmse)
              << (res.rmse_vs_reference ? " (vs reference)" : " (spread)");
  std::cout << "  variance " << fmt(res.variance) << "  reduction "
            << fmt(res.variance_ratio) << "\n";
  std::cout << "wrote " << cfg.output << "\n";
  return 0;
}

int cmd_convergence(const RunConfig& cfg) {
  ModelHandle model;
  open_model(cfg.model, model);
  double horizon = 1.0;
  check(weakcv_model_horizon(model.h, &horizon), "model query");
  int has_ref = 0;
  double ref = 0.0;
  check(weakcv_model_reference(model.h, &has_ref, &ref), "model query");
  if (!has_ref)
    std::cerr << "note: model has no reference value; the rmse column "
                 "stays 0\n";

  const std::string method = "order" + std::to_string(cfg.order);
  std::vector<Row> rows;
  for (std::int64_t steps : cfg.resolved_steps()) {
    Row r;
    r.method = method;
    r.epsilon = horizon / static_cast<double>(steps);  // step size
    r.J = steps;
    r.reps = 1;
    r.seed = cfg.seed;

    int feasible = 0;
    check(weakcv_exact_feasible(model.h, cfg.order, steps, &feasible),
          "enumeration check");
    if (feasible) {
      check(weakcv_exact_expectation(model.h, cfg.order, steps, &r.estimate),
            "exact expectation");
    } else {
      // out of enumeration cap: high-path plain Monte Carlo stand-in
      weakcv_run_params rp;
      weakcv_run_params_init(&rp);
      rp.method = WEAKCV_METHOD_SMC;
      rp.order = cfg.order;
      rp.steps = steps;
      rp.n_test = cfg.tier == "full" ? 10000000 : 1000000;
      rp.seed = cfg.seed;
      rp.threads = cfg.threads;
      weakcv_result res;
      check(weakcv_run(model.h, &rp, &res), "sampled bias run");
      r.estimate = res.estimate;
      r.variance = res.variance;
      r.N0 = res.N0;
    }
    if (has_ref) r.rmse = std::abs(r.estimate - ref);  // discretisation bias
    rows.push_back(r);
  }

  write_file(cfg.output, csv_text(rows));
  write_manifest("convergence", cfg);
  std::cout << "wrote " << cfg.output << " (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_complexity(const RunConfig& cfg) {
  ModelHandle model;
  open_model(cfg.model, model);
  const std::vector<double> epsilons = cfg.resolved_epsilons();

  std::vector<Row> rows;
  std::vector<Row> slope_rows;
  for (const std::string& method : cfg.methods) {
    std::vector<double> rmse, secs;
    bool first = true;
    for (double epsilon : epsilons) {
      weakcv_run_params rp =
          make_params(cfg, method, epsilon, model.h, !first);
      first = false;
      weakcv_result res;
      check(weakcv_run(model.h, &rp, &res),
            method + " run at epsilon " + fmt(epsilon));
      rows.push_back(row_of(method, res));
      rmse.push_back(res.rmse);
      secs.push_back(res.wall_seconds);
      std::cerr << method << " eps " << fmt(epsilon) << ": rmse "
                << fmt(res.rmse) << ", " << fmt(res.wall_seconds)
                << " s/rep\n";
    }
    double slope = 0.0;
    check(weakcv_fit_slope(rmse.data(), secs.data(),
                           static_cast<std::int64_t>(rmse.size()), &slope),
          "slope fit for " + method);
    Row s;
    s.method = "slope:" + method;
    s.estimate = slope;
    s.reps = cfg.resolved_reps();
    s.seed = cfg.seed;
    slope_rows.push_back(s);
    std::cout << "slope " << method << " " << fmt(slope) << "\n";
  }
  rows.insert(rows.end(), slope_rows.begin(), slope_rows.end());

  write_file(cfg.output, csv_text(rows));
  write_manifest("complexity", cfg);
  if (cfg.emit_gnuplot) emit_gnuplot_script(cfg);
  std::cout << "wrote " << cfg.output << " (" << rows.size() << " rows)\n";
  return 0;
}

struct VerifyPrinter {
  double worst = 0.0;
  static void row(const char* model, int order, int64_t steps,
                  double residual, void* user) {
    auto* self = static_cast<VerifyPrinter*>(user);
    self->worst = std::max(self->worst, residual);
    std::printf("%-28s order %d  J %2lld  residual %.3e\n", model, order,
                static_cast<long long>(steps), residual);
  }
};

int cmd_verify(const RunConfig& cfg) {
  (void)cfg;
  VerifyPrinter printer;
  double worst = 0.0;
  check(weakcv_verify_suite(3, &VerifyPrinter::row, &printer, &worst),
        "verification suite");
  std::printf("max residual %.3e\n", worst);
  if (worst > 1e-10) {
    std::cerr << "error: representation residual exceeds 1e-10\n";
    return WEAKCV_ERR_ACCURACY;
  }
  return 0;
}

}  // namespace

int run_command(const std::string& command, const RunConfig& cfg) {
  try {
    cfg.validate();
    if (command == "estimate") return cmd_estimate(cfg);
    if (command == "convergence") return cmd_convergence(cfg);
    if (command == "complexity") return cmd_complexity(cfg);
    if (command == "verify") return cmd_verify(cfg);
    std::cerr << "error: unknown command '" << command << "'\n";
    return WEAKCV_ERR_CONFIG;
  } catch (const RunFailure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.status;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return WEAKCV_ERR_CONFIG;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return WEAKCV_ERR_INTERNAL;
  }
}

}  // namespace weakcv_cli

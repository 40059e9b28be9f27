#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <weakcv/weakcv.h>

#include "cli/config.hpp"
#include "cli/run.hpp"

namespace {

/// Options land here as raw (key, value) pairs so the config-file parser and
/// the flag parser share one code path (apply_key) and one set of checks.
struct PendingOptions {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common_options(CLI::App* sub, PendingOptions& pending) {
  sub->add_option_function<std::string>(
      "--config",
      [&pending](const std::string& v) { pending.config_path = v; },
      "Configuration file (key = value lines); flags override its entries");

  auto forward = [&pending, sub](const std::string& flag,
                                 const std::string& key,
                                 const std::string& help) {
    sub->add_option_function<std::string>(
        flag,
        [&pending, key](const std::string& v) {
          pending.overrides.emplace_back(key, v);
        },
        help);
  };

  forward("--model", "model", "Model id: motivating, arsinh1d, fivedim");
  forward("--method", "method",
          "Estimator(s), comma separated: smc, mlmc, rcv, rrcv");
  forward("--order", "order", "Weak scheme order (1 or 2)");
  forward("--epsilon", "epsilon",
          "Accuracy list: decimals, 2^-k, or ranges like 2^-2..2^-6");
  forward("--p", "p", "Polynomial degree of the regression basis");
  forward("--basis", "basis", "Basis family: global or piecewise");
  forward("--q", "q", "Piecewise cubes per axis (overrides the chosen Q)");
  forward("--r", "r", "Piecewise domain half-width (overrides the chosen R)");
  forward("--truncate", "truncate",
          "Coefficient truncation: auto, on, or off");
  forward("--nu", "nu", "Smoothness index (inf for unlimited)");
  forward("--c-j", "c_j", "Step-count prefactor");
  forward("--c-n", "c_n", "Training-size prefactor (0 keeps the default)");
  forward("--c-n0", "c_n0", "Evaluation-size prefactor (0 keeps the default)");
  forward("--c-q", "c_q", "Cube-count prefactor");
  forward("--c-r", "c_r", "Half-width prefactor");
  forward("--reps", "reps", "Independent repetitions (default set by tier)");
  forward("--seed", "seed", "Master seed");
  forward("--threads", "threads", "Worker threads (0 = hardware)");
  forward("--output", "output", "Result CSV path");
  forward("--steps", "steps", "Step counts for convergence, e.g. 2,4,8,16");

  sub->add_flag_callback(
      "--full",
      [&pending] { pending.overrides.emplace_back("tier", "full"); },
      "Full tier: more repetitions and smaller accuracies");
  sub->add_flag_callback(
      "--exact-cv",
      [&pending] { pending.overrides.emplace_back("exact_cv", "true"); },
      "Use the closed-form control variate (motivating model, order 1)");
  sub->add_flag_callback(
      "--emit-gnuplot",
      [&pending] { pending.overrides.emplace_back("emit_gnuplot", "true"); },
      "Also write a gnuplot script next to the CSV (complexity)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakcv: regression control variates for weak SDE schemes"};
  app.set_version_flag("--version", weakcv_version());
  app.require_subcommand(1);

  PendingOptions pending;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Run one estimator at one accuracy and write a CSV row");
  CLI::App* convergence = app.add_subcommand(
      "convergence", "Measure discretisation bias against the step count");
  CLI::App* complexity = app.add_subcommand(
      "complexity", "Sweep accuracies per method and fit cost-vs-RMSE slopes");
  CLI::App* verify = app.add_subcommand(
      "verify", "Check scheme moments against exact enumeration");
  for (CLI::App* sub : {estimate, convergence, complexity, verify})
    add_common_options(sub, pending);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  weakcv_cli::RunConfig cfg;
  try {
    if (!pending.config_path.empty())
      cfg = weakcv_cli::load_config_file(pending.config_path);
    for (const auto& [key, value] : pending.overrides)
      weakcv_cli::apply_key(cfg, key, value);
  } catch (const weakcv_cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  return weakcv_cli::run_command(command, cfg);
}

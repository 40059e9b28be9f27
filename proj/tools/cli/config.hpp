#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace weakcv_cli {

/// Invalid configuration input; the message names the key and, for file
/// input, the line.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One run description, shared by every subcommand. Unset optionals fall
/// back to tier defaults (quick: 20 repetitions, epsilon down to 2^-4;
/// full: 100 repetitions, epsilon down to 2^-6). The prefactors c_* use 0
/// for "benchmark default".
struct RunConfig {
  std::string model = "arsinh1d";
  std::vector<std::string> methods = {"rrcv"};
  int order = 2;
  std::vector<double> epsilons;  // empty: tier default
  int p = 3;
  std::string basis = "global";  // global | piecewise
  std::optional<std::int64_t> q_cubes;
  std::optional<double> r_halfwidth;
  std::string truncate = "auto";  // auto | on | off
  double nu = 0.0;                // 0: nu -> infinity limit
  double c_j = 0.0, c_n = 0.0, c_n0 = 0.0, c_q = 0.0, c_r = 0.0;
  std::optional<std::int64_t> reps;  // unset: tier default
  std::uint64_t seed = 1;
  int threads = 0;
  std::string output = "weakcv_out.csv";
  std::string tier = "quick";  // quick | full
  std::vector<std::int64_t> steps_list;  // convergence grid; empty: 2,4,8,16
  bool exact_cv = false;
  bool emit_gnuplot = false;

  bool operator==(const RunConfig&) const = default;

  std::vector<double> resolved_epsilons() const;
  std::int64_t resolved_reps() const;
  std::vector<std::int64_t> resolved_steps() const;

  /// Cross-field checks beyond per-key parsing. Throws ConfigError.
  void validate() const;
};

/// Epsilon list syntax: comma-separated entries, each either a decimal in
/// (0,1), a dyadic power "2^-k", or a dyadic range "2^-a..2^-b" expanding
/// one exponent at a time.
std::vector<double> parse_epsilon_list(const std::string& text);

/// Applies one key = value pair. `line` > 0 adds file positions to error
/// messages; pass 0 for command-line flags. Unknown keys are rejected; the
/// manifest bookkeeping keys "command" and "version" are accepted and
/// ignored.
void apply_key(RunConfig& cfg, const std::string& key,
               const std::string& value, int line = 0);

/// Parses key = value text ('#' starts a comment). Throws ConfigError with
/// the offending line number.
RunConfig parse_config_text(const std::string& text);

RunConfig load_config_file(const std::string& path);

/// Canonical form: fixed key order, dyadic epsilons printed as 2^-k,
/// unset optionals omitted. parse_config_text(canonical_text(c)) == c.
std::string canonical_text(const RunConfig& cfg);

}  // namespace weakcv_cli

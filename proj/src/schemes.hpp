#pragma once

#include <cstdint>
#include <vector>

#include "common.hpp"
#include "models.hpp"
#include "rng.hpp"
#include "stochastics.hpp"

namespace weakcv {

struct SchemeSpec {
  int order = 2;
  std::int64_t steps = 1;  // J; step size is horizon / J
};

/// Model data evaluated once per state, shared by every outcome propagated
/// from that state.
struct StepWorkspace {
  std::vector<double> mu;  // d
  std::vector<double> sg;  // d*m row major
  SecondOrderData d2;      // filled for order 2 only

  void prepare(const SdeModel& model, const double* x, int order);
};

/// x + mu dt + sigma xi sqrt(dt)
void step_weak_euler(const StepWorkspace& w, const SdeModel& model,
                     const double* x, const double* xi, double dt,
                     double* out);

/// Simplified second-order weak Taylor step. `v` is the packed upper
/// triangle of V (ignored when the model drops the off-diagonal terms).
void step_weak_taylor2(const StepWorkspace& w, const SdeModel& model,
                       const double* x, const double* xi,
                       const std::int8_t* v, double dt, double* out);

/// Dispatches on spec.order after preparing the workspace.
void step_scheme(StepWorkspace& w, const SdeModel& model, int order,
                 const double* x, const double* xi, const std::int8_t* v,
                 double dt, double* out);

/// Euler-Maruyama with Gaussian increments dw (used by the MLMC reference
/// estimator, not by the weak schemes).
void step_euler_maruyama(const StepWorkspace& w, const SdeModel& model,
                         const double* x, const double* dw, double dt,
                         double* out);

constexpr std::size_t kDefaultMemoryBudget = std::size_t{3} << 30;

/// Simulated paths with their driving increments. States hold every grid
/// point including x0; increments are stored packed (two bits per xi
/// coordinate, one bit per V pair) so the bundle replays exactly.
struct PathBundle {
  std::string model_id;
  int order = 2;
  int d = 1;
  int m = 1;
  std::int64_t steps = 1;
  std::int64_t n_paths = 0;
  bool with_v = false;
  double dt = 0.0;
  std::uint64_t master_seed = 0;
  std::uint64_t phase = 0;
  std::vector<double> states;      // [path][step 0..J][coord]
  std::vector<std::uint8_t> incr;  // [path][step] packed

  int bits_per_step() const {
    return 2 * m + (with_v ? pair_count(m) : 0);
  }
  int bytes_per_step() const { return (bits_per_step() + 7) / 8; }

  const double* state(std::int64_t path, std::int64_t step) const {
    return states.data() + (path * (steps + 1) + step) * d;
  }
  double* state(std::int64_t path, std::int64_t step) {
    return states.data() + (path * (steps + 1) + step) * d;
  }

  void encode_increment(std::int64_t path, std::int64_t step,
                        const double* xi, const std::int8_t* v);
  void decode_increment(std::int64_t path, std::int64_t step, double* xi,
                        std::int8_t* v) const;

  std::size_t memory_bytes() const;
};

/// Simulates n_paths independent paths. Streams are keyed on
/// (seed, phase, path, step): the result is bit-identical for any thread
/// count. Exceeding the memory budget is a resource error.
PathBundle simulate_paths(const SdeModel& model, const SchemeSpec& spec,
                          std::int64_t n_paths, std::uint64_t seed,
                          Phase phase, int threads,
                          std::size_t memory_budget = kDefaultMemoryBudget);

}  // namespace weakcv

#include "schemes.hpp"

#include <cmath>

namespace weakcv {

void StepWorkspace::prepare(const SdeModel& model, const double* x,
                            int order) {
  mu.resize(static_cast<std::size_t>(model.d));
  sg.resize(static_cast<std::size_t>(model.d) * model.m);
  model.drift(x, mu.data());
  model.diffusion(x, sg.data());
  if (order == 2) scheme_derivatives(model, x, d2);
}

void step_weak_euler(const StepWorkspace& w, const SdeModel& model,
                     const double* x, const double* xi, double dt,
                     double* out) {
  const int d = model.d, m = model.m;
  const double sdt = std::sqrt(dt);
  for (int r = 0; r < d; ++r) {
    double acc = x[r] + w.mu[static_cast<std::size_t>(r)] * dt;
    for (int k = 0; k < m; ++k)
      acc += w.sg[static_cast<std::size_t>(r) * m + k] * xi[k] * sdt;
    out[r] = acc;
  }
}

void step_weak_taylor2(const StepWorkspace& w, const SdeModel& model,
                       const double* x, const double* xi,
                       const std::int8_t* v, double dt, double* out) {
  const int d = model.d, m = model.m;
  const double sdt = std::sqrt(dt);
  const double dt32 = dt * sdt;
  const bool no_offdiag = model.zero_offdiag_lsigma;
  for (int r = 0; r < d; ++r) {
    double acc = x[r] + w.mu[static_cast<std::size_t>(r)] * dt +
                 0.5 * w.d2.l0mu[static_cast<std::size_t>(r)] * dt * dt;
    for (int k = 0; k < m; ++k) {
      acc += w.sg[static_cast<std::size_t>(r) * m + k] * xi[k] * sdt;
      acc += 0.5 *
             (w.d2.l0sigma[static_cast<std::size_t>(r) * m + k] +
              w.d2.lkmu[static_cast<std::size_t>(k) * d + r]) *
             xi[k] * dt32;
      if (no_offdiag) {
        // only (k,k) survives; V^{kk} = -1
        acc += 0.5 *
               w.d2.lksigma[(static_cast<std::size_t>(k) * d + r) * m + k] *
               (xi[k] * xi[k] - 1.0) * dt;
      } else {
        for (int l = 0; l < m; ++l)
          acc += 0.5 *
                 w.d2.lksigma[(static_cast<std::size_t>(k) * d + r) * m + l] *
                 (xi[k] * xi[l] + v_entry(v, m, k, l)) * dt;
      }
    }
    out[r] = acc;
  }
}

void step_scheme(StepWorkspace& w, const SdeModel& model, int order,
                 const double* x, const double* xi, const std::int8_t* v,
                 double dt, double* out) {
  w.prepare(model, x, order);
  if (order == 1)
    step_weak_euler(w, model, x, xi, dt, out);
  else
    step_weak_taylor2(w, model, x, xi, v, dt, out);
}

void step_euler_maruyama(const StepWorkspace& w, const SdeModel& model,
                         const double* x, const double* dw, double dt,
                         double* out) {
  const int d = model.d, m = model.m;
  for (int r = 0; r < d; ++r) {
    double acc = x[r] + w.mu[static_cast<std::size_t>(r)] * dt;
    for (int k = 0; k < m; ++k)
      acc += w.sg[static_cast<std::size_t>(r) * m + k] * dw[k];
    out[r] = acc;
  }
}

namespace {

inline void put_bits(std::uint8_t* base, int bit_off, int width, int code) {
  for (int b = 0; b < width; ++b) {
    const int pos = bit_off + b;
    const std::uint8_t mask = static_cast<std::uint8_t>(1u << (pos % 8));
    if (code & (1 << b))
      base[pos / 8] = static_cast<std::uint8_t>(base[pos / 8] | mask);
    else
      base[pos / 8] = static_cast<std::uint8_t>(base[pos / 8] & ~mask);
  }
}

inline int get_bits(const std::uint8_t* base, int bit_off, int width) {
  int code = 0;
  for (int b = 0; b < width; ++b) {
    const int pos = bit_off + b;
    if (base[pos / 8] & (1u << (pos % 8))) code |= 1 << b;
  }
  return code;
}

const double kRoot3 = std::sqrt(3.0);

}  // namespace

void PathBundle::encode_increment(std::int64_t path, std::int64_t step,
                                  const double* xi, const std::int8_t* v) {
  std::uint8_t* base =
      incr.data() + (path * steps + step) * bytes_per_step();
  for (int i = 0; i < m; ++i) {
    int code;
    if (order == 1)
      code = xi[i] > 0 ? 1 : 0;
    else
      code = xi[i] < -0.5 ? 0 : (xi[i] > 0.5 ? 2 : 1);
    put_bits(base, 2 * i, 2, code);
  }
  if (with_v)
    for (int p = 0; p < pair_count(m); ++p)
      put_bits(base, 2 * m + p, 1, v[p] > 0 ? 1 : 0);
}

void PathBundle::decode_increment(std::int64_t path, std::int64_t step,
                                  double* xi, std::int8_t* v) const {
  const std::uint8_t* base =
      incr.data() + (path * steps + step) * bytes_per_step();
  for (int i = 0; i < m; ++i) {
    const int code = get_bits(base, 2 * i, 2);
    if (order == 1)
      xi[i] = code ? 1.0 : -1.0;
    else
      xi[i] = code == 0 ? -kRoot3 : (code == 2 ? kRoot3 : 0.0);
  }
  if (with_v)
    for (int p = 0; p < pair_count(m); ++p)
      v[p] = get_bits(base, 2 * m + p, 1) ? 1 : -1;
}

std::size_t PathBundle::memory_bytes() const {
  return states.size() * sizeof(double) + incr.size();
}

PathBundle simulate_paths(const SdeModel& model, const SchemeSpec& spec,
                          std::int64_t n_paths, std::uint64_t seed,
                          Phase phase, int threads,
                          std::size_t memory_budget) {
  require(spec.order == 1 || spec.order == 2, ErrorKind::config,
          "simulate_paths: scheme order must be 1 or 2");
  require(spec.steps >= 1, ErrorKind::config,
          "simulate_paths: need at least one step");
  require(n_paths >= 1, ErrorKind::config,
          "simulate_paths: need at least one path");

  PathBundle b;
  b.model_id = model.id;
  b.order = spec.order;
  b.d = model.d;
  b.m = model.m;
  b.steps = spec.steps;
  b.n_paths = n_paths;
  b.with_v = model_uses_v(model, spec.order);
  b.dt = model.horizon / static_cast<double>(spec.steps);
  b.master_seed = seed;
  b.phase = phase_tag(phase);

  const std::size_t state_bytes = static_cast<std::size_t>(n_paths) *
                                  (spec.steps + 1) * model.d * sizeof(double);
  const std::size_t incr_bytes = static_cast<std::size_t>(n_paths) *
                                 spec.steps * b.bytes_per_step();
  require(state_bytes + incr_bytes <= memory_budget, ErrorKind::resource,
          "simulate_paths: bundle of " +
              std::to_string((state_bytes + incr_bytes) >> 20) +
              " MiB exceeds the memory budget");

  b.states.resize(state_bytes / sizeof(double));
  b.incr.assign(incr_bytes, 0);

  const std::uint64_t tag = b.phase;
  parallel_blocks(n_paths, threads,
                  [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    StepWorkspace w;
    std::vector<double> xi(static_cast<std::size_t>(model.m));
    std::vector<std::int8_t> v(
        static_cast<std::size_t>(pair_count(model.m)), -1);
    for (std::int64_t i = lo; i < hi; ++i) {
      double* s0 = b.state(i, 0);
      std::copy(model.x0.begin(), model.x0.end(), s0);
      for (std::int64_t j = 0; j < spec.steps; ++j) {
        RngStream rs = RngStream::at(seed, tag,
                                     static_cast<std::uint64_t>(i),
                                     static_cast<std::uint64_t>(j));
        sample_increment(rs, spec.order, model.m, b.with_v, xi.data(),
                         v.data());
        b.encode_increment(i, j, xi.data(), v.data());
        step_scheme(w, model, spec.order, b.state(i, j), xi.data(), v.data(),
                    b.dt, b.state(i, j + 1));
      }
    }
  });
  return b;
}

}  // namespace weakcv

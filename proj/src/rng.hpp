#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace weakcv {

namespace detail {
// splitmix64 finaliser; full-avalanche mix of a 64-bit word.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Stream labels. Training and testing paths never share a stream; MLMC
/// levels get their own label space.
enum class Phase : std::uint64_t {
  train = 0x747261696eull,
  test = 0x74657374ull,
  mlmc = 0x6d6c6d63ull,
  aux = 0x617578ull,
};

inline std::uint64_t phase_tag(Phase p, std::uint64_t sub = 0) {
  return detail::mix64(static_cast<std::uint64_t>(p) ^
                       detail::mix64(0x5a5a5a5aull ^ sub));
}

/// Counter-based generator. The stream is fully determined by
/// (master seed, phase, path index, step index), so draws are reproducible
/// bit-for-bit no matter how paths are distributed over worker threads.
class RngStream {
 public:
  static RngStream at(std::uint64_t master, std::uint64_t phase,
                      std::uint64_t path, std::uint64_t step) {
    RngStream s;
    std::uint64_t k = detail::mix64(master);
    k = detail::mix64(k ^ phase);
    k = detail::mix64(k ^ (path + 0x9e3779b97f4a7c15ull));
    k = detail::mix64(k ^ (step + 0xd1b54a32d192ed03ull));
    s.key_ = k;
    return s;
  }

  std::uint64_t next_u64() {
    return detail::mix64(key_ ^ (ctr_++ * 0x9e3779b97f4a7c15ull));
  }

  /// Uniform on [0,1) with 53 random bits.
  double next_uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  bool next_sign_bit() { return (next_u64() >> 63) != 0; }

  /// Standard normal via Box-Muller; consumes two uniforms per call.
  double next_normal() {
    double u1 = next_uniform();
    while (u1 <= 0.0) u1 = next_uniform();
    const double u2 = next_uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t ctr_ = 0;
};

/// Derives an independent master seed for repetition `rep` of a batch.
inline std::uint64_t rep_seed(std::uint64_t master, std::uint64_t rep) {
  return detail::mix64(detail::mix64(master) ^
                       (rep * 0xda942042e4dd58b5ull + 0x2545f4914f6cdd1dull));
}

}  // namespace weakcv

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace weakcv {

/// Failure taxonomy. `config` = bad user input, `contract` = API misuse,
/// `numerical` = non-finite intermediate, `accuracy` = a requested tolerance
/// or convergence target cannot be met, `resource` = budget exceeded.
enum class ErrorKind { config, contract, numerical, accuracy, resource };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& msg) {
  throw Error(kind, msg);
}

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
  if (!cond) raise(kind, msg);
}

/// FNV-1a, used to stamp model identities into serialised artifacts.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Work items [0,n) are cut into fixed-size blocks and handed to a worker
/// pool. The block size never depends on the thread count, so per-block
/// partial results can be reduced in block order to give results that are
/// bit-identical for any worker count.
constexpr std::int64_t kParallelBlock = 1024;

inline std::int64_t block_count(std::int64_t n) {
  return (n + kParallelBlock - 1) / kParallelBlock;
}

/// body(block_index, begin, end) is invoked once per block.
inline void parallel_blocks(
    std::int64_t n, int threads,
    const std::function<void(std::int64_t, std::int64_t, std::int64_t)>& body) {
  const std::int64_t blocks = block_count(n);
  const int workers =
      static_cast<int>(std::min<std::int64_t>(resolve_threads(threads), blocks));
  if (workers <= 1) {
    for (std::int64_t b = 0; b < blocks; ++b) {
      const std::int64_t lo = b * kParallelBlock;
      body(b, lo, std::min(n, lo + kParallelBlock));
    }
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<std::int64_t> next{0};
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::int64_t b = next.fetch_add(1);
        if (b >= blocks) return;
        const std::int64_t lo = b * kParallelBlock;
        body(b, lo, std::min(n, lo + kParallelBlock));
      }
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace weakcv

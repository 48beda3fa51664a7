#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace spactor {

/// Counter-free splitmix64 stream. The full state is one u64, so streams
/// serialize exactly and byte-for-byte reproducible runs are cheap. Named
/// sub-streams and per-example forks are derived by hashing, never by
/// advancing a shared state, which keeps example-level work order-independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  /// Stream for a named purpose ("spans", "mlm", ...) under a master seed.
  static RngStream named(std::uint64_t master, std::string_view name);

  /// Child stream for index `i` (per example, per step, ...). Does not
  /// advance this stream.
  RngStream fork(std::uint64_t i) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double next_double();
  /// Uniform integer in [0, n), n >= 1. Unbiased (rejection sampling).
  std::uint64_t next_below(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double next_normal();
  /// Normal truncated to [-2, 2] standard deviations.
  double next_trunc_normal();

  /// k distinct values from {0, .., n-1}, returned sorted ascending.
  std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k);

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

/// FNV-1a over bytes; used for stable content hashes in manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view s);

/// Stateless mix of several words into one seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0, std::uint64_t d = 0);

}  // namespace spactor

#include "spactor/rng.hpp"

#include <cmath>
#include <numbers>

#include "spactor/common.hpp"

namespace spactor {

namespace {

inline std::uint64_t splitmix_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t scramble(std::uint64_t x) {
  std::uint64_t s = x;
  return splitmix_next(s);
}

}  // namespace

RngStream RngStream::named(std::uint64_t master, std::string_view name) {
  return RngStream(mix_seed(scramble(master), fnv1a64(name)));
}

RngStream RngStream::fork(std::uint64_t i) const {
  return RngStream(mix_seed(scramble(state_), scramble(i ^ 0xA5A5A5A5A5A5A5A5ULL)));
}

std::uint64_t RngStream::next_u64() { return splitmix_next(state_); }

double RngStream::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
  require(n >= 1, "next_below: n must be >= 1");
  if (n == 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RngStream::next_normal() {
  double u1 = next_double();
  double u2 = next_double();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::next_trunc_normal() {
  for (;;) {
    double z = next_normal();
    if (z >= -2.0 && z <= 2.0) return z;
  }
}

std::vector<std::uint64_t> RngStream::sample_without_replacement(std::uint64_t n, std::uint64_t k) {
  require(k <= n, "sample_without_replacement: k > n");
  // Partial Fisher-Yates over an index vector; fine at the sizes used here.
  std::vector<std::uint64_t> idx(n);
  for (std::uint64_t i = 0; i < n; ++i) idx[i] = i;
  for (std::uint64_t i = 0; i < k; ++i) {
    std::uint64_t j = i + next_below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  std::uint64_t s = a;
  s = splitmix_next(s) ^ b;
  s = splitmix_next(s) ^ c;
  s = splitmix_next(s) ^ d;
  return splitmix_next(s);
}

}  // namespace spactor

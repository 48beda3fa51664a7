#include "spactor/synthetic.hpp"

#include <cmath>
#include <vector>

#include "spactor/common.hpp"
#include "spactor/rng.hpp"

namespace spactor {

std::string synthetic_corpus(std::size_t n_bytes, std::uint64_t seed, int n_types) {
  require(n_types >= 16, "synthetic corpus: need at least 16 word types");
  RngStream rng = RngStream::named(seed, "synthetic");

  std::vector<std::string> words(n_types);
  for (int i = 0; i < n_types; ++i) words[i] = "w" + std::to_string(i);

  // fixed successor per word; a random permutation keeps the chain aperiodic
  std::vector<int> successor(n_types);
  for (int i = 0; i < n_types; ++i) successor[i] = i;
  for (int i = 0; i + 1 < n_types; ++i) {
    int j = i + static_cast<int>(rng.next_below(n_types - i));
    std::swap(successor[i], successor[j]);
  }

  // Zipf(1.2) restart distribution as a CDF
  std::vector<double> cdf(n_types);
  double z = 0.0;
  for (int i = 0; i < n_types; ++i) {
    z += 1.0 / std::pow(static_cast<double>(i + 1), 1.2);
    cdf[i] = z;
  }
  auto zipf_draw = [&]() {
    const double u = rng.next_double() * z;
    int lo = 0, hi = n_types - 1;
    while (lo < hi) {
      const int mid = (lo + hi) / 2;
      if (cdf[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  };

  std::string out;
  out.reserve(n_bytes + 64);
  while (out.size() < n_bytes) {
    const int len = 8 + static_cast<int>(rng.next_below(13));
    int w = zipf_draw();
    for (int i = 0; i < len; ++i) {
      out += words[w];
      out += i + 1 < len ? ' ' : '\n';
      w = rng.next_double() < 0.85 ? successor[w] : zipf_draw();
    }
  }
  return out;
}

}  // namespace spactor

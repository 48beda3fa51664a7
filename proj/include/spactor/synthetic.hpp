#pragma once

#include <cstdint>
#include <string>

namespace spactor {

/// Deterministic synthetic corpus for desk-scale runs: one sentence per
/// line over ~`n_types` word types chained by a mostly-deterministic bigram
/// successor (85% follow, else a Zipf-weighted restart). The strong local
/// structure gives a small model something real to learn while keeping the
/// unigram distribution broad.
std::string synthetic_corpus(std::size_t n_bytes, std::uint64_t seed, int n_types = 2200);

}  // namespace spactor

#pragma once

#include <vector>

#include "spactor/common.hpp"
#include "spactor/rng.hpp"
#include "spactor/vocab.hpp"

namespace spactor {

/// Inclusive token-index span over the original sequence.
struct Span {
  int start = 0;
  int end = 0;
  int length() const { return end - start + 1; }
};

/// Ordered, disjoint, non-adjacent spans selected for corruption.
struct SpanSet {
  std::vector<Span> spans;

  int count() const { return static_cast<int>(spans.size()); }
  int covered_tokens() const {
    int total = 0;
    for (const auto& s : spans) total += s.length();
    return total;
  }
};

/// Post-SC token positions picked for [M] masking (sorted, never sentinels).
struct MlmSet {
  std::vector<int> positions;
  int count() const { return static_cast<int>(positions.size()); }
};

struct CorruptionConfig {
  double r_sc = 0.15;
  double mu = 3.0;
  double r_mlm = 0.15;
};

/// One fully corrupted training example.
struct CorruptedExample {
  TokenSeq original;     // X, length N
  TokenSeq sc_text;      // X_c, length n
  TokenSeq masked_text;  // X_c with [M] overlaid, length n
  TokenSeq target;       // [S0] span0 [S1] span1 ... [EOS]
  SpanSet span_set;
  MlmSet mlm_set;
  int n = 0;  // length of sc_text / masked_text
};

/// Select spans covering round(N * r_sc) tokens (at least 1), split into
/// p = max(1, round(budget / mu)) spans placed uniformly among all disjoint,
/// non-adjacent placements. Throws "sequence too short" when no such
/// placement exists.
SpanSet plan_spans(int n_tokens, double r_sc, double mu, RngStream& rng);

/// Replace the k-th span with sentinel id k; everything else kept in order.
TokenSeq apply_span_corruption(TokenView x, const SpanSet& s, const Vocabulary& vocab);

/// Pick round(r_mlm * #non-sentinel) positions of x_c uniformly without
/// replacement, skipping sentinels (and pads, which never reach here in the
/// training pipeline). Consumes no randomness when the quota is zero.
MlmSet plan_mlm(TokenView x_c, double r_mlm, RngStream& rng, const Vocabulary& vocab);

/// Overlay [M] at the planned positions.
TokenSeq apply_mlm(TokenView x_c, const MlmSet& m, const Vocabulary& vocab);

/// [S0] span0 tokens [S1] span1 tokens ... [EOS].
TokenSeq build_decoder_target(TokenView x, const SpanSet& s, const Vocabulary& vocab);

/// Compose the full pipeline: plan spans, apply SC, plan MLM, apply MLM,
/// build the decoder target. The single-stream form draws spans then MLM
/// positions from one stream; the two-stream form keeps the named "spans"
/// and "mlm" streams separate, as the trainer does.
CorruptedExample corrupt_example(TokenView x, const CorruptionConfig& cfg, RngStream& rng,
                                 const Vocabulary& vocab);
CorruptedExample corrupt_example(TokenView x, const CorruptionConfig& cfg, RngStream& spans_rng,
                                 RngStream& mlm_rng, const Vocabulary& vocab);

/// True when `plan_spans` can place spans in a sequence of this length.
bool corruptible(int n_tokens, double r_sc, double mu);

/// label[l] = true iff replaced_text[l] != sc_text[l]; all three sequences
/// must have equal length.
std::vector<std::uint8_t> rtd_labels(TokenView masked_text, TokenView replaced_text,
                                     TokenView sc_text);

}  // namespace spactor

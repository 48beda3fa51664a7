#include "spactor/corruption.hpp"

#include <algorithm>
#include <cmath>

namespace spactor {

namespace {

int round_count(double x) { return static_cast<int>(std::llround(x)); }

void check_spans(TokenView x, const SpanSet& s) {
  int prev_end = -2;
  for (const auto& sp : s.spans) {
    require(sp.start >= 0 && sp.end < static_cast<int>(x.size()) && sp.start <= sp.end,
            "span out of range");
    require(sp.start > prev_end + 1, "spans must be disjoint and non-adjacent");
    prev_end = sp.end;
  }
}

}  // namespace

SpanSet plan_spans(int n_tokens, double r_sc, double mu, RngStream& rng) {
  require(r_sc > 0.0 && r_sc < 1.0, "r_sc must be in (0, 1)");
  require(mu >= 1.0, "mu must be >= 1");
  if (n_tokens < static_cast<int>(mu) + 2) throw Error("sequence too short");

  const int budget = std::max(1, round_count(n_tokens * r_sc));
  int p = std::max(1, round_count(budget / mu));
  p = std::min(p, budget);  // every span needs at least one token

  const int free_tokens = n_tokens - budget;
  if (free_tokens < std::max(1, p - 1)) throw Error("sequence too short");

  // Split the budget into p positive parts: p-1 distinct cuts in {1..B-1}.
  std::vector<int> lengths;
  if (p == 1) {
    lengths.push_back(budget);
  } else {
    auto cuts = rng.sample_without_replacement(budget - 1, p - 1);
    lengths.reserve(p);
    int prev = 0;
    for (auto c : cuts) {
      lengths.push_back(static_cast<int>(c + 1) - prev);
      prev = static_cast<int>(c + 1);
    }
    lengths.push_back(budget - prev);
  }

  // Place spans uniformly among valid arrangements: after reserving one
  // mandatory free token between consecutive spans, distribute the remaining
  // slack into the p+1 gaps by stars and bars.
  const int slack = free_tokens - (p - 1);
  std::vector<int> gaps(p + 1, 0);
  if (slack > 0) {
    auto bars = rng.sample_without_replacement(slack + p, p);
    int prev = -1;
    for (int k = 0; k < p; ++k) {
      gaps[k] = static_cast<int>(bars[k]) - prev - 1;
      prev = static_cast<int>(bars[k]);
    }
    gaps[p] = slack + p - 1 - prev;
  }

  SpanSet out;
  out.spans.reserve(p);
  int cursor = gaps[0];
  for (int k = 0; k < p; ++k) {
    Span sp{cursor, cursor + lengths[k] - 1};
    out.spans.push_back(sp);
    cursor = sp.end + 1;
    if (k + 1 < p) cursor += 1 + gaps[k + 1];
  }
  return out;
}

TokenSeq apply_span_corruption(TokenView x, const SpanSet& s, const Vocabulary& vocab) {
  check_spans(x, s);
  if (s.count() > vocab.num_sentinels()) throw Error("sentinel budget exceeded");
  TokenSeq out;
  out.reserve(x.size());
  size_t i = 0;
  for (int k = 0; k < s.count(); ++k) {
    const auto& sp = s.spans[k];
    while (i < static_cast<size_t>(sp.start)) out.push_back(x[i++]);
    out.push_back(vocab.sentinel_id(k));
    i = static_cast<size_t>(sp.end) + 1;
  }
  while (i < x.size()) out.push_back(x[i++]);
  return out;
}

MlmSet plan_mlm(TokenView x_c, double r_mlm, RngStream& rng, const Vocabulary& vocab) {
  require(r_mlm >= 0.0 && r_mlm < 1.0, "r_mlm must be in [0, 1)");
  std::vector<int> candidates;
  candidates.reserve(x_c.size());
  for (size_t i = 0; i < x_c.size(); ++i) {
    if (!vocab.is_sentinel(x_c[i]) && x_c[i] != vocab.pad_id())
      candidates.push_back(static_cast<int>(i));
  }
  const int q = round_count(r_mlm * static_cast<double>(candidates.size()));
  MlmSet out;
  if (q == 0) return out;
  auto picks = rng.sample_without_replacement(candidates.size(), q);
  out.positions.reserve(q);
  for (auto k : picks) out.positions.push_back(candidates[k]);
  return out;
}

TokenSeq apply_mlm(TokenView x_c, const MlmSet& m, const Vocabulary& vocab) {
  TokenSeq out(x_c.begin(), x_c.end());
  for (int pos : m.positions) {
    require(pos >= 0 && pos < static_cast<int>(out.size()), "MLM position out of range");
    if (vocab.is_sentinel(out[pos])) throw Error("MLM over sentinel");
    out[pos] = vocab.mlm_id();
  }
  return out;
}

TokenSeq build_decoder_target(TokenView x, const SpanSet& s, const Vocabulary& vocab) {
  check_spans(x, s);
  if (s.count() > vocab.num_sentinels()) throw Error("sentinel budget exceeded");
  TokenSeq out;
  out.reserve(s.covered_tokens() + s.count() + 1);
  for (int k = 0; k < s.count(); ++k) {
    out.push_back(vocab.sentinel_id(k));
    for (int i = s.spans[k].start; i <= s.spans[k].end; ++i) out.push_back(x[i]);
  }
  out.push_back(vocab.eos_id());
  return out;
}

CorruptedExample corrupt_example(TokenView x, const CorruptionConfig& cfg, RngStream& rng,
                                 const Vocabulary& vocab) {
  return corrupt_example(x, cfg, rng, rng, vocab);
}

CorruptedExample corrupt_example(TokenView x, const CorruptionConfig& cfg, RngStream& spans_rng,
                                 RngStream& mlm_rng, const Vocabulary& vocab) {
  CorruptedExample ex;
  ex.original.assign(x.begin(), x.end());
  ex.span_set = plan_spans(static_cast<int>(x.size()), cfg.r_sc, cfg.mu, spans_rng);
  ex.sc_text = apply_span_corruption(x, ex.span_set, vocab);
  ex.mlm_set = plan_mlm(ex.sc_text, cfg.r_mlm, mlm_rng, vocab);
  ex.masked_text = apply_mlm(ex.sc_text, ex.mlm_set, vocab);
  ex.target = build_decoder_target(x, ex.span_set, vocab);
  ex.n = static_cast<int>(ex.sc_text.size());
  return ex;
}

bool corruptible(int n_tokens, double r_sc, double mu) {
  if (!(r_sc > 0.0 && r_sc < 1.0) || mu < 1.0) return false;
  if (n_tokens < static_cast<int>(mu) + 2) return false;
  const int budget = std::max(1, static_cast<int>(std::llround(n_tokens * r_sc)));
  int p = std::max(1, static_cast<int>(std::llround(budget / mu)));
  p = std::min(p, budget);
  return n_tokens - budget >= std::max(1, p - 1);
}

std::vector<std::uint8_t> rtd_labels(TokenView masked_text, TokenView replaced_text,
                                     TokenView sc_text) {
  require(masked_text.size() == replaced_text.size() && masked_text.size() == sc_text.size(),
          "rtd_labels: sequence length mismatch");
  std::vector<std::uint8_t> labels(sc_text.size());
  for (size_t i = 0; i < sc_text.size(); ++i) labels[i] = replaced_text[i] != sc_text[i] ? 1 : 0;
  return labels;
}

}  // namespace spactor

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "spactor/common.hpp"
#include "spactor/graph.hpp"
#include "spactor/model_config.hpp"
#include "spactor/rng.hpp"

namespace spactor {

/// Named tensors for the whole generator/discriminator pair. One embedder
/// instance is shared by the generator path, the discriminator path and the
/// (tied) decoder output projection. Names:
///   embedder                               [v x d]
///   gen.proj                               [d x v]
///   {gen.enc|disc.enc}.l<i>.attn.{wq,wk,wv,wo}   [d x d]
///   {gen.enc|disc.enc}.l<i>.{norm1,norm2}.g      [1 x d]
///   {gen.enc|disc.enc}.l<i>.mlp.{w1,w2}
///   {gen.enc|disc.enc}.final_norm.g
///   disc.dec.l<i>.{self,cross}.{wq,wk,wv,wo}, .norm{1,2,3}.g, .mlp.{w1,w2}
///   disc.dec.final_norm.g
///   rtd.{w1,b1,w2,b2}
template <class S>
struct ModelParams {
  ModelConfig config;
  std::map<std::string, Mat<S>> tensors;

  const Mat<S>& at(const std::string& name) const {
    auto it = tensors.find(name);
    require(it != tensors.end(), "unknown parameter: " + name);
    return it->second;
  }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& [_, t] : tensors) n += t.size();
    return n;
  }

  /// Names updated in the SC-only stage: discriminator plus the shared
  /// embedder; generator and RTD head are frozen.
  static bool retained_after_transition(const std::string& name) {
    return name == "embedder" || name.rfind("disc.", 0) == 0;
  }
};

/// Deterministic init: weights ~ truncated normal scaled by 1/sqrt(fan_in)
/// (embedder by 1.0), biases zero, norm gains one.
template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Sinusoidal position table, rows = positions.
template <class S>
Mat<S> sinusoidal_positions(int len, int d);

/// Optional capture of attention weight matrices (post-softmax) for tests.
template <class S>
struct AttnTrace {
  std::vector<Mat<S>> weights;
};

/// Ids of the parameter leaves inserted into a Graph for one step.
struct ParamNodes {
  std::map<std::string, NodeId> ids;
  NodeId at(const std::string& name) const {
    auto it = ids.find(name);
    require(it != ids.end(), "unknown parameter node: " + name);
    return it->second;
  }
};

template <class S>
ParamNodes insert_params(Graph<S>& g, const ModelParams<S>& params,
                         const std::set<std::string>* trainable = nullptr) {
  ParamNodes pn;
  for (const auto& [name, tensor] : params.tensors) {
    const bool needs_grad = trainable == nullptr || trainable->count(name) > 0;
    pn.ids[name] = g.leaf(tensor, needs_grad);
  }
  return pn;
}

namespace detail {

template <class S>
NodeId multihead_attention(Graph<S>& g, NodeId q_in, NodeId kv_in, NodeId wq, NodeId wk,
                           NodeId wv, NodeId wo, int heads, const ByteMask& mask,
                           AttnTrace<S>* trace) {
  const int d = static_cast<int>(g.value(q_in).cols());
  const int dh = d / heads;
  NodeId q = g.matmul(q_in, wq);
  NodeId k = g.matmul(kv_in, wk);
  NodeId v = g.matmul(kv_in, wv);
  const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
  std::vector<NodeId> ctx;
  ctx.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    NodeId qh = g.cols(q, h * dh, dh);
    NodeId kh = g.cols(k, h * dh, dh);
    NodeId vh = g.cols(v, h * dh, dh);
    NodeId scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh);
    NodeId attn = g.masked_softmax_rows(scores, mask);
    if (trace) trace->weights.push_back(g.value(attn));
    ctx.push_back(g.matmul(attn, vh));
  }
  return g.matmul(g.hconcat(ctx), wo);
}

template <class S>
NodeId mlp_block(Graph<S>& g, NodeId x, NodeId w1, NodeId w2) {
  return g.matmul(g.gelu(g.matmul(x, w1)), w2);
}

inline ByteMask key_mask(int rows, const std::vector<std::uint8_t>& key_valid) {
  ByteMask m(rows, static_cast<int>(key_valid.size()));
  for (int i = 0; i < rows; ++i)
    for (size_t j = 0; j < key_valid.size(); ++j) m(i, static_cast<int>(j)) = key_valid[j];
  return m;
}

inline ByteMask causal_key_mask(const std::vector<std::uint8_t>& key_valid) {
  const int n = static_cast<int>(key_valid.size());
  ByteMask m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = (j <= i && key_valid[j]) ? 1 : 0;
  return m;
}

}  // namespace detail

/// Bidirectional encoder stack ("gen.enc" or "disc.enc"); returns [n x d].
template <class S>
NodeId encoder_stack(Graph<S>& g, const ParamNodes& pn, const std::string& prefix, int layers,
                     int heads, const std::vector<int>& ids,
                     const std::vector<std::uint8_t>& valid, AttnTrace<S>* trace = nullptr) {
  const int n = static_cast<int>(ids.size());
  NodeId x = g.embedding_rows(pn.at("embedder"), ids);
  const int d = static_cast<int>(g.value(x).cols());
  NodeId pe = g.leaf(sinusoidal_positions<S>(n, d));
  x = g.add(x, pe);
  const ByteMask mask = detail::key_mask(n, valid);
  for (int l = 0; l < layers; ++l) {
    const std::string lp = prefix + ".l" + std::to_string(l);
    NodeId h = g.rmsnorm(x, pn.at(lp + ".norm1.g"));
    NodeId a = detail::multihead_attention(g, h, h, pn.at(lp + ".attn.wq"), pn.at(lp + ".attn.wk"),
                                           pn.at(lp + ".attn.wv"), pn.at(lp + ".attn.wo"), heads,
                                           mask, trace);
    x = g.add(x, a);
    NodeId h2 = g.rmsnorm(x, pn.at(lp + ".norm2.g"));
    x = g.add(x, detail::mlp_block(g, h2, pn.at(lp + ".mlp.w1"), pn.at(lp + ".mlp.w2")));
  }
  return g.rmsnorm(x, pn.at(prefix + ".final_norm.g"));
}

/// Causal decoder stack with cross-attention over `enc_out`; returns [t x d].
template <class S>
NodeId decoder_stack(Graph<S>& g, const ParamNodes& pn, int layers, int heads,
                     const std::vector<int>& input_ids,
                     const std::vector<std::uint8_t>& input_valid, NodeId enc_out,
                     const std::vector<std::uint8_t>& enc_valid, AttnTrace<S>* trace = nullptr) {
  const int t = static_cast<int>(input_ids.size());
  NodeId x = g.embedding_rows(pn.at("embedder"), input_ids);
  const int d = static_cast<int>(g.value(x).cols());
  NodeId pe = g.leaf(sinusoidal_positions<S>(t, d));
  x = g.add(x, pe);
  const ByteMask self_mask = detail::causal_key_mask(input_valid);
  const ByteMask cross_mask = detail::key_mask(t, enc_valid);
  for (int l = 0; l < layers; ++l) {
    const std::string lp = "disc.dec.l" + std::to_string(l);
    NodeId h = g.rmsnorm(x, pn.at(lp + ".norm1.g"));
    NodeId a = detail::multihead_attention(g, h, h, pn.at(lp + ".self.wq"), pn.at(lp + ".self.wk"),
                                           pn.at(lp + ".self.wv"), pn.at(lp + ".self.wo"), heads,
                                           self_mask, trace);
    x = g.add(x, a);
    NodeId h2 = g.rmsnorm(x, pn.at(lp + ".norm2.g"));
    NodeId c = detail::multihead_attention(g, h2, enc_out, pn.at(lp + ".cross.wq"),
                                           pn.at(lp + ".cross.wk"), pn.at(lp + ".cross.wv"),
                                           pn.at(lp + ".cross.wo"), heads, cross_mask, trace);
    x = g.add(x, c);
    NodeId h3 = g.rmsnorm(x, pn.at(lp + ".norm3.g"));
    x = g.add(x, detail::mlp_block(g, h3, pn.at(lp + ".mlp.w1"), pn.at(lp + ".mlp.w2")));
  }
  return g.rmsnorm(x, pn.at("disc.dec.final_norm.g"));
}

/// Generator vocabulary logits, [n x v].
template <class S>
NodeId generator_logits(Graph<S>& g, const ParamNodes& pn, NodeId gen_enc_out) {
  return g.matmul(gen_enc_out, pn.at("gen.proj"));
}

/// Decoder vocabulary logits through the tied embedder, [t x v]. The hidden
/// state is scaled by 1/sqrt(d) before the tied projection.
template <class S>
NodeId decoder_logits(Graph<S>& g, const ParamNodes& pn, NodeId dec_out) {
  const int d = static_cast<int>(g.value(dec_out).cols());
  NodeId scaled = g.scale(dec_out, S(1) / std::sqrt(S(d)));
  return g.matmul(scaled, g.transpose(pn.at("embedder")));
}

/// RTD probabilities in (0,1), [n x 1]: sigmoid of a 2-layer GELU MLP.
template <class S>
NodeId rtd_probabilities(Graph<S>& g, const ParamNodes& pn, NodeId disc_enc_out) {
  NodeId h = g.add_row_broadcast(g.matmul(disc_enc_out, pn.at("rtd.w1")), pn.at("rtd.b1"));
  NodeId z = g.add_row_broadcast(g.matmul(g.gelu(h), pn.at("rtd.w2")), pn.at("rtd.b2"));
  return g.sigmoid(z);
}

// --------------------------------------------------------------- eval API
// Value-only wrappers over the graph builders, one matrix per batch row.
// Pad id is 0 by the fixed vocabulary layout.

std::vector<std::uint8_t> row_valid_mask(TokenView row, TokenId pad_id = 0);

template <class S>
std::vector<Mat<S>> generator_forward(const ModelParams<S>& params, const TokenMatrix& tokens);

template <class S>
std::vector<Mat<S>> discriminator_encode(const ModelParams<S>& params, const TokenMatrix& tokens,
                                         AttnTrace<S>* trace = nullptr);

template <class S>
std::vector<Vec<S>> rtd_head_forward(const ModelParams<S>& params,
                                     const std::vector<Mat<S>>& enc_out);

/// Teacher-forced decode: `target_prefix` rows are the shifted decoder
/// inputs; encoder states and their pad masks come from the encode call.
template <class S>
std::vector<Mat<S>> discriminator_decode(const ModelParams<S>& params,
                                         const std::vector<Mat<S>>& enc_out,
                                         const TokenMatrix& enc_tokens,
                                         const TokenMatrix& target_prefix);

/// Sample a categorical token at temperature 1 for every MLM position of
/// every row; other positions copy sc_text. Draws consume `rng` sequentially
/// (row-major over positions); no gradients are involved.
template <class S>
TokenMatrix sample_replacements(const std::vector<Mat<S>>& gen_logits,
                                const std::vector<std::vector<int>>& mlm_positions,
                                const TokenMatrix& sc_text, RngStream& rng);

// ------------------------------------------------------------ definitions

template <class S>
Mat<S> sinusoidal_positions(int len, int d) {
  Mat<S> pe(len, d);
  for (int pos = 0; pos < len; ++pos) {
    for (int i = 0; i < d; i += 2) {
      const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d);
      pe(pos, i) = static_cast<S>(std::sin(angle));
      if (i + 1 < d) pe(pos, i + 1) = static_cast<S>(std::cos(angle));
    }
  }
  return pe;
}

template <class S>
ModelParams<S> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<S> p;
  p.config = cfg;
  RngStream rng = RngStream::named(seed, "init");

  auto normal_mat = [&](int rows, int cols, double stddev) {
    Mat<S> m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m(i, j) = static_cast<S>(rng.next_trunc_normal() * stddev);
    return m;
  };
  auto ones_row = [&](int cols) { return Mat<S>::Ones(1, cols); };
  auto zeros_row = [&](int cols) { return Mat<S>::Zero(1, cols).eval(); };

  const int d = cfg.d;
  const double ws = 1.0 / std::sqrt(static_cast<double>(d));

  p.tensors["embedder"] = normal_mat(cfg.v, d, 1.0);

  auto add_encoder = [&](const std::string& prefix, int layers, int mlp) {
    for (int l = 0; l < layers; ++l) {
      const std::string lp = prefix + ".l" + std::to_string(l);
      for (const char* w : {"wq", "wk", "wv", "wo"})
        p.tensors[lp + ".attn." + w] = normal_mat(d, d, ws);
      p.tensors[lp + ".norm1.g"] = ones_row(d);
      p.tensors[lp + ".norm2.g"] = ones_row(d);
      p.tensors[lp + ".mlp.w1"] = normal_mat(d, mlp, ws);
      p.tensors[lp + ".mlp.w2"] = normal_mat(mlp, d, 1.0 / std::sqrt(static_cast<double>(mlp)));
    }
    p.tensors[prefix + ".final_norm.g"] = ones_row(d);
  };

  add_encoder("gen.enc", cfg.gen_layers, cfg.gen_mlp);
  p.tensors["gen.proj"] = normal_mat(d, cfg.v, ws);
  add_encoder("disc.enc", cfg.disc_layers, cfg.disc_mlp);

  for (int l = 0; l < cfg.disc_layers; ++l) {
    const std::string lp = "disc.dec.l" + std::to_string(l);
    for (const char* blk : {"self", "cross"})
      for (const char* w : {"wq", "wk", "wv", "wo"})
        p.tensors[lp + "." + blk + "." + w] = normal_mat(d, d, ws);
    p.tensors[lp + ".norm1.g"] = ones_row(d);
    p.tensors[lp + ".norm2.g"] = ones_row(d);
    p.tensors[lp + ".norm3.g"] = ones_row(d);
    p.tensors[lp + ".mlp.w1"] = normal_mat(d, cfg.disc_mlp, ws);
    p.tensors[lp + ".mlp.w2"] =
        normal_mat(cfg.disc_mlp, d, 1.0 / std::sqrt(static_cast<double>(cfg.disc_mlp)));
  }
  p.tensors["disc.dec.final_norm.g"] = ones_row(d);

  p.tensors["rtd.w1"] = normal_mat(d, cfg.rtd_mlp, ws);
  p.tensors["rtd.b1"] = zeros_row(cfg.rtd_mlp);
  p.tensors["rtd.w2"] = normal_mat(cfg.rtd_mlp, 1, 1.0 / std::sqrt(static_cast<double>(cfg.rtd_mlp)));
  p.tensors["rtd.b2"] = zeros_row(1);
  return p;
}

inline std::vector<std::uint8_t> row_valid_mask(TokenView row, TokenId pad_id) {
  std::vector<std::uint8_t> v(row.size());
  for (size_t i = 0; i < row.size(); ++i) v[i] = row[i] != pad_id ? 1 : 0;
  return v;
}

namespace detail {

inline std::vector<int> to_int_ids(TokenView row) {
  return std::vector<int>(row.begin(), row.end());
}

template <class S>
void check_len(const ModelParams<S>& p, int n) {
  require(n <= p.config.max_len, "sequence length exceeds max_len");
}

}  // namespace detail

template <class S>
std::vector<Mat<S>> generator_forward(const ModelParams<S>& params, const TokenMatrix& tokens) {
  detail::check_len(params, tokens.cols);
  Graph<S> g;
  ParamNodes pn = insert_params(g, params, nullptr);
  std::vector<Mat<S>> out;
  out.reserve(tokens.rows);
  for (int r = 0; r < tokens.rows; ++r) {
    auto valid = row_valid_mask(tokens.row(r));
    NodeId enc = encoder_stack(g, pn, "gen.enc", params.config.gen_layers,
                               params.config.disc_heads, detail::to_int_ids(tokens.row(r)), valid);
    out.push_back(g.value(generator_logits(g, pn, enc)));
  }
  return out;
}

template <class S>
std::vector<Mat<S>> discriminator_encode(const ModelParams<S>& params, const TokenMatrix& tokens,
                                         AttnTrace<S>* trace) {
  detail::check_len(params, tokens.cols);
  Graph<S> g;
  ParamNodes pn = insert_params(g, params, nullptr);
  std::vector<Mat<S>> out;
  out.reserve(tokens.rows);
  for (int r = 0; r < tokens.rows; ++r) {
    auto valid = row_valid_mask(tokens.row(r));
    NodeId enc = encoder_stack(g, pn, "disc.enc", params.config.disc_layers,
                               params.config.disc_heads, detail::to_int_ids(tokens.row(r)), valid,
                               trace);
    out.push_back(g.value(enc));
  }
  return out;
}

template <class S>
std::vector<Vec<S>> rtd_head_forward(const ModelParams<S>& params,
                                     const std::vector<Mat<S>>& enc_out) {
  Graph<S> g;
  ParamNodes pn = insert_params(g, params, nullptr);
  std::vector<Vec<S>> out;
  out.reserve(enc_out.size());
  for (const auto& h : enc_out) {
    NodeId probs = rtd_probabilities(g, pn, g.leaf(h));
    out.push_back(g.value(probs).col(0));
  }
  return out;
}

template <class S>
std::vector<Mat<S>> discriminator_decode(const ModelParams<S>& params,
                                         const std::vector<Mat<S>>& enc_out,
                                         const TokenMatrix& enc_tokens,
                                         const TokenMatrix& target_prefix) {
  detail::check_len(params, target_prefix.cols);
  require(static_cast<int>(enc_out.size()) == enc_tokens.rows &&
              enc_tokens.rows == target_prefix.rows,
          "discriminator_decode: batch size mismatch");
  Graph<S> g;
  ParamNodes pn = insert_params(g, params, nullptr);
  std::vector<Mat<S>> out;
  out.reserve(enc_out.size());
  for (int r = 0; r < target_prefix.rows; ++r) {
    auto enc_valid = row_valid_mask(enc_tokens.row(r));
    auto dec_valid = row_valid_mask(target_prefix.row(r));
    dec_valid[0] = 1;  // the shifted-in start token is a pad id but is real input
    NodeId dec = decoder_stack(g, pn, params.config.disc_layers, params.config.disc_heads,
                               detail::to_int_ids(target_prefix.row(r)), dec_valid,
                               g.leaf(enc_out[r]), enc_valid);
    out.push_back(g.value(decoder_logits(g, pn, dec)));
  }
  return out;
}

template <class S>
TokenMatrix sample_replacements(const std::vector<Mat<S>>& gen_logits,
                                const std::vector<std::vector<int>>& mlm_positions,
                                const TokenMatrix& sc_text, RngStream& rng) {
  require(static_cast<int>(gen_logits.size()) == sc_text.rows &&
              mlm_positions.size() == gen_logits.size(),
          "sample_replacements: batch size mismatch");
  TokenMatrix out = sc_text;
  for (int r = 0; r < sc_text.rows; ++r) {
    for (int pos : mlm_positions[r]) {
      const auto& logits = gen_logits[r];
      // categorical draw by inverse CDF over a stable softmax
      const double m = static_cast<double>(logits.row(pos).maxCoeff());
      double z = 0.0;
      for (Eigen::Index jcol = 0; jcol < logits.cols(); ++jcol)
        z += std::exp(static_cast<double>(logits(pos, jcol)) - m);
      double u = rng.next_double() * z;
      TokenId pick = static_cast<TokenId>(logits.cols() - 1);
      double acc = 0.0;
      for (Eigen::Index jcol = 0; jcol < logits.cols(); ++jcol) {
        acc += std::exp(static_cast<double>(logits(pos, jcol)) - m);
        if (u < acc) {
          pick = static_cast<TokenId>(jcol);
          break;
        }
      }
      out.at(r, pos) = pick;
    }
  }
  return out;
}

}  // namespace spactor

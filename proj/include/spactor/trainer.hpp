#pragma once

#include <filesystem>
#include <optional>
#include <set>

#include "spactor/checkpoint.hpp"
#include "spactor/config.hpp"
#include "spactor/corruption.hpp"
#include "spactor/flops.hpp"
#include "spactor/model.hpp"
#include "spactor/objectives.hpp"
#include "spactor/optimizer.hpp"
#include "spactor/packing.hpp"

namespace spactor {

/// Inverse-square-root schedule with warmup plateau: 1 / sqrt(max(n, kappa)).
double lr_schedule(std::uint64_t step, std::uint64_t kappa);

struct StepMetrics {
  std::uint64_t step = 0;
  Stage stage = Stage::Hybrid;
  double lr = 0.0;
  bool has_hybrid_terms = false;
  double l_g = 0.0;
  double l_rtd = 0.0;
  double l_sc = 0.0;
  double total = 0.0;
  std::int64_t mlm_tokens = 0;
  std::int64_t rtd_positions = 0;
  std::int64_t target_tokens = 0;
  std::int64_t tokens_per_step = 0;
  double gflops_per_step = 0.0;
};

template <class S>
struct TrainState {
  TrainConfig config;
  ModelParams<S> params;
  Optimizer<S> opt;
  std::uint64_t step = 0;
  Stage stage = Stage::Hybrid;
};

template <class S>
std::set<std::string> trainable_names(const ModelParams<S>& params, Stage stage) {
  std::set<std::string> out;
  for (const auto& [name, _] : params.tensors) {
    if (stage == Stage::Hybrid || ModelParams<S>::retained_after_transition(name))
      out.insert(name);
  }
  return out;
}

/// Freeze the generator and RTD head: drop their optimizer slots and stop
/// updating them. Discriminator and embedder values are untouched.
template <class S>
void transition(TrainState<S>& state) {
  require(state.step == state.config.tau, "transition called at wrong step");
  state.stage = Stage::ScOnly;
  state.opt.retain_only(trainable_names(state.params, Stage::ScOnly));
}

/// One optimization step over a [batch x input_len] id matrix.
///
/// Hybrid stage: corrupt -> generator forward -> sample replacements ->
/// discriminator encode (RTD head) and decode -> weighted three-term loss ->
/// one update of all parameters. SC-only stage: corruption with r_mlm = 0,
/// clean X_c into the encoder, decoder loss alone, discriminator + embedder
/// updated. Rows too short to corrupt are skipped.
template <class S>
StepMetrics train_step(TrainState<S>& state, const TokenMatrix& batch, const Vocabulary& vocab) {
  const TrainConfig& cfg = state.config;
  const bool hybrid = state.stage == Stage::Hybrid;
  const Reduction red = cfg.reduction();
  require(batch.cols <= cfg.effective_max_len(), "batch length exceeds max_len");

  CorruptionConfig ccfg = cfg.corruption_config();
  if (!hybrid) ccfg.r_mlm = 0.0;

  // per-row corruption with per-example derived streams
  std::vector<CorruptedExample> examples(batch.rows);
  std::vector<bool> active(batch.rows, false);
  const RngStream spans_master = RngStream::named(cfg.seed, "spans").fork(state.step);
  const RngStream mlm_master = RngStream::named(cfg.seed, "mlm").fork(state.step);
  int n_max = 0, t_max = 0;
  for (int r = 0; r < batch.rows; ++r) {
    TokenView row = batch.row(r);
    size_t n = row.size();
    while (n > 0 && row[n - 1] == vocab.pad_id()) --n;
    if (!corruptible(static_cast<int>(n), ccfg.r_sc, ccfg.mu)) continue;
    RngStream spans_rng = spans_master.fork(r);
    RngStream mlm_rng = mlm_master.fork(r);
    examples[r] = corrupt_example(row.subspan(0, n), ccfg, spans_rng, mlm_rng, vocab);
    active[r] = true;
    n_max = std::max(n_max, examples[r].n);
    t_max = std::max(t_max, static_cast<int>(examples[r].target.size()));
  }

  StepMetrics m;
  m.step = state.step;
  m.stage = state.stage;
  m.lr = lr_schedule(state.step, cfg.kappa);
  m.has_hybrid_terms = hybrid;
  m.tokens_per_step = static_cast<std::int64_t>(batch.rows) * batch.cols;
  m.gflops_per_step = flops_per_step_gflops(state.params.config, cfg.input_len, cfg.r_sc, cfg.mu,
                                            batch.rows, hybrid);

  if (t_max == 0) {  // nothing corruptible in this batch
    state.step += 1;
    return m;
  }

  // padded batch views
  auto padded = [&](const TokenSeq& seq, int len) {
    TokenSeq out(len, vocab.pad_id());
    std::copy(seq.begin(), seq.end(), out.begin());
    return out;
  };

  Graph<S> g;
  const std::set<std::string> trainable = trainable_names(state.params, state.stage);
  ParamNodes pn = insert_params(g, state.params, &trainable);

  // generator pass + replacement sampling (hybrid only)
  std::vector<TokenSeq> masked_rows(batch.rows), sc_rows(batch.rows);
  std::vector<std::vector<std::uint8_t>> enc_valid(batch.rows);
  std::vector<NodeId> gen_logit_nodes(batch.rows, -1);
  for (int r = 0; r < batch.rows; ++r) {
    if (!active[r]) continue;
    masked_rows[r] = padded(examples[r].masked_text, n_max);
    sc_rows[r] = padded(examples[r].sc_text, n_max);
    enc_valid[r] = row_valid_mask(masked_rows[r]);
    if (hybrid) {
      NodeId enc =
          encoder_stack(g, pn, "gen.enc", cfg.gen_layers, cfg.disc_heads,
                        detail::to_int_ids(masked_rows[r]), enc_valid[r]);
      gen_logit_nodes[r] = generator_logits(g, pn, enc);
    }
  }

  std::vector<TokenSeq> disc_input_rows(batch.rows);
  std::vector<std::vector<std::uint8_t>> labels(batch.rows);
  if (hybrid) {
    RngStream sampling_rng = RngStream::named(cfg.seed, "sampling").fork(state.step);
    for (int r = 0; r < batch.rows; ++r) {
      if (!active[r]) continue;
      const Mat<S>& logits = g.value(gen_logit_nodes[r]);
      TokenSeq replaced = sc_rows[r];
      for (int pos : examples[r].mlm_set.positions) {
        const double mx = static_cast<double>(logits.row(pos).maxCoeff());
        double z = 0.0;
        for (Eigen::Index j = 0; j < logits.cols(); ++j)
          z += std::exp(static_cast<double>(logits(pos, j)) - mx);
        const double u = sampling_rng.next_double() * z;
        double acc = 0.0;
        TokenId pick = static_cast<TokenId>(logits.cols() - 1);
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
          acc += std::exp(static_cast<double>(logits(pos, j)) - mx);
          if (u < acc) {
            pick = static_cast<TokenId>(j);
            break;
          }
        }
        replaced[pos] = pick;
      }
      labels[r] = rtd_labels(masked_rows[r], replaced, sc_rows[r]);
      disc_input_rows[r] = std::move(replaced);
    }
  } else {
    for (int r = 0; r < batch.rows; ++r)
      if (active[r]) disc_input_rows[r] = sc_rows[r];
  }

  // discriminator passes
  std::vector<NodeId> rtd_prob_nodes, dec_logit_nodes;
  std::vector<std::vector<std::uint8_t>> rtd_labels_batch, rtd_valid_batch, sc_valid_batch;
  std::vector<std::vector<int>> sc_targets_batch;
  GeneratorLossBatch gen_batch;
  for (int r = 0; r < batch.rows; ++r) {
    if (!active[r]) continue;
    const CorruptedExample& ex = examples[r];
    NodeId disc_enc =
        encoder_stack(g, pn, "disc.enc", cfg.disc_layers, cfg.disc_heads,
                      detail::to_int_ids(disc_input_rows[r]), enc_valid[r]);
    if (hybrid) {
      rtd_prob_nodes.push_back(rtd_probabilities(g, pn, disc_enc));
      rtd_labels_batch.push_back(labels[r]);
      rtd_valid_batch.push_back(enc_valid[r]);

      gen_batch.logits.push_back(gen_logit_nodes[r]);
      gen_batch.positions.push_back(ex.mlm_set.positions);
      std::vector<int> originals;
      originals.reserve(ex.mlm_set.positions.size());
      for (int pos : ex.mlm_set.positions) originals.push_back(ex.sc_text[pos]);
      gen_batch.target_ids.push_back(std::move(originals));
    }

    TokenSeq target_row = padded(ex.target, t_max);
    TokenSeq dec_input(t_max, vocab.pad_id());
    for (int i = 1; i < t_max; ++i) dec_input[i] = target_row[i - 1];
    auto dec_valid = row_valid_mask(dec_input);
    dec_valid[0] = 1;
    NodeId dec = decoder_stack(g, pn, cfg.disc_layers, cfg.disc_heads,
                               detail::to_int_ids(dec_input), dec_valid, disc_enc, enc_valid[r]);
    dec_logit_nodes.push_back(decoder_logits(g, pn, dec));
    sc_targets_batch.push_back(detail::to_int_ids(target_row));
    sc_valid_batch.push_back(row_valid_mask(target_row));
  }

  // losses
  std::int64_t sc_count = 0;
  NodeId l_sc_sum = sc_loss_sum(g, dec_logit_nodes, sc_targets_batch, sc_valid_batch, &sc_count);
  NodeId l_sc = finalize_reduction(g, l_sc_sum, red, sc_count, batch.rows);
  m.target_tokens = sc_count;
  m.l_sc = static_cast<double>(g.value(l_sc)(0, 0));

  NodeId total_node = l_sc;
  if (hybrid) {
    std::int64_t gen_count = 0, rtd_count = 0;
    NodeId l_g_sum = generator_loss_sum(g, gen_batch, &gen_count);
    NodeId l_g = finalize_reduction(g, l_g_sum, red, gen_count, batch.rows);
    NodeId l_rtd_sum = rtd_loss_sum(g, rtd_prob_nodes, rtd_labels_batch, rtd_valid_batch,
                                    &rtd_count);
    NodeId l_rtd = finalize_reduction(g, l_rtd_sum, red, rtd_count, batch.rows);
    m.mlm_tokens = gen_count;
    m.rtd_positions = rtd_count;
    m.l_g = static_cast<double>(g.value(l_g)(0, 0));
    m.l_rtd = static_cast<double>(g.value(l_rtd)(0, 0));
    total_node = g.add(l_g, g.add(g.scale(l_rtd, static_cast<S>(cfg.lambda1)),
                                  g.scale(l_sc, static_cast<S>(cfg.lambda2))));
    m.total = m.l_g + cfg.lambda1 * m.l_rtd + cfg.lambda2 * m.l_sc;
  } else {
    m.total = m.l_sc;
  }

  if (!std::isfinite(static_cast<double>(g.value(total_node)(0, 0))) ||
      !std::isfinite(m.total))
    throw Error("divergence at step " + std::to_string(state.step));

  g.backward(total_node);
  std::map<std::string, Mat<S>> grads;
  for (const auto& name : trainable) grads[name] = g.grad(pn.at(name));
  state.opt.step(state.params, grads, trainable, m.lr, state.step + 1);

  state.step += 1;
  return m;
}

// ------------------------------------------------------------- run driver

struct RunResult {
  std::filesystem::path run_dir;
  std::uint64_t final_step = 0;
  std::vector<StepMetrics> metrics;
};

/// Execute a full pre-training run into `out_dir` (metrics.csv, vocab.txt,
/// manifest.json, checkpoints/step_*). `resume_dir` continues an earlier
/// run's latest checkpoint; the metrics prefix is carried over so the
/// resulting files are byte-identical to an uninterrupted run.
RunResult run_pretrain(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume_dir = std::nullopt);

/// Metrics CSV row/header formatting (stable formatting; byte-reproducible).
std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

}  // namespace spactor

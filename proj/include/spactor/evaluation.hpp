#pragma once

#include <filesystem>
#include <optional>
#include <thread>

#include "spactor/config.hpp"
#include "spactor/corruption.hpp"
#include "spactor/model.hpp"
#include "spactor/objectives.hpp"
#include "spactor/packing.hpp"
#include "spactor/regression.hpp"

namespace spactor {

/// Encoder input for validation-loss evaluation: the original corrupted
/// context X_c, or the generator-resampled context.
enum class ContextMode { Clean, Noisy };
ContextMode parse_context_mode(const std::string& s);
std::string context_mode_name(ContextMode m);

struct EvalOptions {
  ContextMode mode = ContextMode::Clean;
  std::uint64_t seed = 0;
  int threads = 1;
  /// Testing hook: run the noisy pipeline but force the generator to emit
  /// the ground-truth tokens, making the two modes coincide exactly.
  bool force_ground_truth = false;
};

/// Mean decoder cross-entropy per target token over the whole corpus
/// stream. Deterministic given (params, corpus, seed); the validation
/// stream is sharded across threads and reduced in batch order.
template <class S>
double eval_sc_loss_params(const ModelParams<S>& params, const TrainConfig& cfg,
                           const Vocabulary& vocab, const TokenSeq& corpus_ids,
                           const EvalOptions& opts);

/// Checkpoint-based form used by the CLI.
double eval_sc_loss(const std::filesystem::path& checkpoint_dir, const TrainConfig& cfg,
                    const Vocabulary& vocab, const std::filesystem::path& val_corpus,
                    const EvalOptions& opts);

/// Clean/noisy loss series over the common checkpoints of two runs plus the
/// OLS trend test on their difference (A minus B).
struct GapEvalResult {
  std::vector<double> steps;
  std::vector<double> loss_a;
  std::vector<double> loss_b;
  GapSeries series;
  RegressionResult regression;
};

GapEvalResult eval_gap(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                       ContextMode mode, std::uint64_t start_step,
                       const std::optional<std::filesystem::path>& val_corpus_override,
                       std::optional<std::uint64_t> seed_override, int threads);

/// Config snapshot recorded in a run directory's manifest.
TrainConfig load_run_config(const std::filesystem::path& run_dir);

// ------------------------------------------------------------ definitions

template <class S>
double eval_sc_loss_params(const ModelParams<S>& params, const TrainConfig& cfg,
                           const Vocabulary& vocab, const TokenSeq& corpus_ids,
                           const EvalOptions& opts) {
  require(!corpus_ids.empty(), "empty corpus");
  const bool noisy = opts.mode == ContextMode::Noisy;
  if (noisy)
    require(params.tensors.count("gen.proj") > 0,
            "noisy-context evaluation needs a generator in the checkpoint");

  const int len = cfg.input_len;
  const int batch = cfg.batch_size;
  const std::uint64_t num_chunks = (corpus_ids.size() + len - 1) / len;
  const std::uint64_t num_batches = (num_chunks + batch - 1) / batch;

  CorruptionConfig ccfg = cfg.corruption_config();
  if (!noisy) ccfg.r_mlm = 0.0;

  const RngStream spans_master = RngStream::named(opts.seed, "eval-spans");
  const RngStream mlm_master = RngStream::named(opts.seed, "eval-mlm");
  const RngStream sampling_master = RngStream::named(opts.seed, "eval-sampling");

  struct BatchLoss {
    double sum = 0.0;
    std::int64_t count = 0;
  };
  std::vector<BatchLoss> partial(num_batches);

  auto process_batch = [&](std::uint64_t b) {
    Graph<S> g;
    const std::set<std::string> no_grad;  // value-only evaluation
    ParamNodes pn = insert_params(g, params, &no_grad);

    std::vector<NodeId> dec_logit_nodes;
    std::vector<std::vector<int>> targets;
    std::vector<std::vector<std::uint8_t>> valid;

    for (int r = 0; r < batch; ++r) {
      const std::uint64_t chunk = b * batch + r;
      if (chunk >= num_chunks) break;
      const std::uint64_t begin = chunk * len;
      const std::uint64_t end = std::min(begin + len, corpus_ids.size());
      TokenView x(corpus_ids.data() + begin, end - begin);
      if (!corruptible(static_cast<int>(x.size()), ccfg.r_sc, ccfg.mu)) continue;

      RngStream spans_rng = spans_master.fork(chunk);
      RngStream mlm_rng = mlm_master.fork(chunk);
      CorruptedExample ex = corrupt_example(x, ccfg, spans_rng, mlm_rng, vocab);

      TokenSeq enc_input = ex.sc_text;
      if (noisy && !ex.mlm_set.positions.empty()) {
        TokenMatrix masked(1, ex.n);
        std::copy(ex.masked_text.begin(), ex.masked_text.end(), masked.data.begin());
        auto gen_valid = row_valid_mask(masked.row(0));
        NodeId gen_enc = encoder_stack(g, pn, "gen.enc", params.config.gen_layers,
                                       params.config.disc_heads,
                                       detail::to_int_ids(masked.row(0)), gen_valid);
        NodeId gen_log = generator_logits(g, pn, gen_enc);
        if (!opts.force_ground_truth) {
          RngStream sampling_rng = sampling_master.fork(chunk);
          TokenMatrix sc(1, ex.n);
          std::copy(ex.sc_text.begin(), ex.sc_text.end(), sc.data.begin());
          std::vector<Mat<S>> logits{g.value(gen_log)};
          TokenMatrix replaced =
              sample_replacements(logits, {ex.mlm_set.positions}, sc, sampling_rng);
          enc_input.assign(replaced.data.begin(), replaced.data.end());
        }
      }

      auto enc_valid = row_valid_mask(enc_input);
      NodeId disc_enc = encoder_stack(g, pn, "disc.enc", params.config.disc_layers,
                                      params.config.disc_heads, detail::to_int_ids(enc_input),
                                      enc_valid);
      const int t = static_cast<int>(ex.target.size());
      TokenSeq dec_input(t, vocab.pad_id());
      for (int i = 1; i < t; ++i) dec_input[i] = ex.target[i - 1];
      std::vector<std::uint8_t> dec_valid(t, 1);
      NodeId dec = decoder_stack(g, pn, params.config.disc_layers, params.config.disc_heads,
                                 detail::to_int_ids(dec_input), dec_valid, disc_enc, enc_valid);
      dec_logit_nodes.push_back(decoder_logits(g, pn, dec));
      targets.push_back(detail::to_int_ids(ex.target));
      valid.push_back(std::vector<std::uint8_t>(t, 1));
    }

    std::int64_t count = 0;
    NodeId sum = sc_loss_sum(g, dec_logit_nodes, targets, valid, &count);
    partial[b] = {static_cast<double>(g.value(sum)(0, 0)), count};
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1 || num_batches <= 1) {
    for (std::uint64_t b = 0; b < num_batches; ++b) process_batch(b);
  } else {
    std::vector<std::thread> workers;
    for (int w = 0; w < threads; ++w) {
      workers.emplace_back([&, w] {
        for (std::uint64_t b = static_cast<std::uint64_t>(w); b < num_batches;
             b += static_cast<std::uint64_t>(threads))
          process_batch(b);
      });
    }
    for (auto& th : workers) th.join();
  }

  double sum = 0.0;
  std::int64_t count = 0;
  for (const auto& p : partial) {
    sum += p.sum;
    count += p.count;
  }
  require(count > 0, "validation corpus produced no usable examples");
  return sum / static_cast<double>(count);
}

}  // namespace spactor

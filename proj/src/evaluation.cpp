#include "spactor/evaluation.hpp"

#include <fstream>

#include <json.hpp>

#include "spactor/checkpoint.hpp"

namespace spactor {

ContextMode parse_context_mode(const std::string& s) {
  if (s == "clean") return ContextMode::Clean;
  if (s == "noisy") return ContextMode::Noisy;
  throw Error("context mode must be 'clean' or 'noisy', got '" + s + "'");
}

std::string context_mode_name(ContextMode m) {
  return m == ContextMode::Clean ? "clean" : "noisy";
}

namespace {

template <class S>
double eval_from_checkpoint(const std::filesystem::path& checkpoint_dir, const TrainConfig& cfg,
                            const Vocabulary& vocab, const TokenSeq& corpus_ids,
                            const EvalOptions& opts) {
  ModelParams<S> params = load_checkpoint_params<S>(checkpoint_dir);
  params.config = cfg.model_config(vocab.size());
  return eval_sc_loss_params(params, cfg, vocab, corpus_ids, opts);
}

}  // namespace

TrainConfig load_run_config(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / "manifest.json");
  require(in.good(), "cannot open run manifest in " + run_dir.string());
  nlohmann::json j;
  in >> j;
  return TrainConfig::parse_text(j.at("config").get<std::string>());
}

double eval_sc_loss(const std::filesystem::path& checkpoint_dir, const TrainConfig& cfg,
                    const Vocabulary& vocab, const std::filesystem::path& val_corpus,
                    const EvalOptions& opts) {
  const TokenSeq ids = encode_corpus_file(val_corpus, vocab);
  if (cfg.dtype == "f64")
    return eval_from_checkpoint<double>(checkpoint_dir, cfg, vocab, ids, opts);
  return eval_from_checkpoint<float>(checkpoint_dir, cfg, vocab, ids, opts);
}

GapEvalResult eval_gap(const std::filesystem::path& run_a, const std::filesystem::path& run_b,
                       ContextMode mode, std::uint64_t start_step,
                       const std::optional<std::filesystem::path>& val_corpus_override,
                       std::optional<std::uint64_t> seed_override, int threads) {
  const TrainConfig cfg_a = load_run_config(run_a);
  const TrainConfig cfg_b = load_run_config(run_b);

  Vocabulary vocab_a = Vocabulary::load(run_a / "vocab.txt");
  Vocabulary vocab_b = Vocabulary::load(run_b / "vocab.txt");
  require(vocab_a.content_hash() == vocab_b.content_hash(),
          "eval-gap: the two runs use different vocabularies");

  std::filesystem::path val_corpus;
  if (val_corpus_override) {
    val_corpus = *val_corpus_override;
  } else {
    require(!cfg_a.val_corpus.empty(),
            "eval-gap: no validation corpus (set val_corpus in the config or pass one)");
    val_corpus = cfg_a.val_corpus;
  }

  EvalOptions opts;
  opts.mode = mode;
  opts.seed = seed_override.value_or(cfg_a.seed);
  opts.threads = threads;

  const auto ckpts_a = list_checkpoints(run_a);
  const auto ckpts_b = list_checkpoints(run_b);

  GapEvalResult out;
  for (const auto& [step, dir_a] : ckpts_a) {
    if (step < start_step) continue;
    auto it = ckpts_b.find(step);
    if (it == ckpts_b.end()) continue;
    out.steps.push_back(static_cast<double>(step));
    out.loss_a.push_back(eval_sc_loss(dir_a, cfg_a, vocab_a, val_corpus, opts));
    out.loss_b.push_back(eval_sc_loss(it->second, cfg_b, vocab_a, val_corpus, opts));
  }
  require(!out.steps.empty(), "eval-gap: no common checkpoints at or after the start step");

  out.series = gap_series(out.steps, out.loss_a, out.steps, out.loss_b, 0.0,
                          run_a.filename().string(), run_b.filename().string());
  if (out.steps.size() >= 3) out.regression = ols_trend_test(out.series);
  return out;
}

}  // namespace spactor

#include "spactor/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spactor {

double lr_schedule(std::uint64_t step, std::uint64_t kappa) {
  require(kappa >= 1, "lr: kappa must be >= 1");
  return 1.0 / std::sqrt(static_cast<double>(std::max(step, kappa)));
}

namespace {

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

Stage stage_at(std::uint64_t step, std::uint64_t tau) {
  return step < tau ? Stage::Hybrid : Stage::ScOnly;
}

Vocabulary prepare_vocab(const TrainConfig& cfg,
                         const std::optional<std::filesystem::path>& resume_dir) {
  if (!cfg.vocab.empty()) return Vocabulary::load(cfg.vocab);
  if (resume_dir) return Vocabulary::load(*resume_dir / "vocab.txt");
  require(!cfg.corpus.empty(), "config key 'corpus' is required for pretraining");
  return Vocabulary::build_from_file(cfg.corpus, cfg.max_vocab, cfg.num_sentinels());
}

void copy_metrics_prefix(const std::filesystem::path& from, std::ofstream& to,
                         std::uint64_t resume_step) {
  std::ifstream in(from);
  require(in.good(), "cannot open metrics file for resume: " + from.string());
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;  // the new file already has its header
    }
    if (line.empty()) continue;
    const std::uint64_t row_step = std::stoull(line.substr(0, line.find(',')));
    if (row_step >= resume_step) break;
    to << line << '\n';
  }
}

template <class S>
RunResult run_impl(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                   const std::optional<std::filesystem::path>& resume_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  require(!fs::exists(out_dir / "metrics.csv"),
          "output directory already contains a run: " + out_dir.string());

  Vocabulary vocab = prepare_vocab(cfg, resume_dir);
  vocab.save(out_dir / "vocab.txt");
  const std::uint64_t vocab_hash = vocab.content_hash();

  TokenSeq corpus_ids = encode_corpus_file(cfg.corpus, vocab);
  BatchStream stream(std::move(corpus_ids), cfg.input_len, cfg.batch_size, cfg.seed,
                     vocab.pad_id());

  TrainState<S> state;
  state.config = cfg;
  state.opt = Optimizer<S>(parse_optimizer(cfg.optimizer));

  std::ofstream csv(out_dir / "metrics.csv", std::ios::binary);
  require(csv.good(), "cannot write metrics.csv in " + out_dir.string());
  csv << metrics_csv_header() << '\n';

  if (resume_dir) {
    const auto checkpoints = list_checkpoints(*resume_dir);
    require(!checkpoints.empty(), "no checkpoints to resume in " + resume_dir->string());
    const auto& [step, dir] = *checkpoints.rbegin();
    Checkpoint<S> c = load_checkpoint<S>(dir, cfg);
    state.params.config = cfg.model_config(vocab.size());
    state.params.tensors = std::move(c.params.tensors);
    state.opt = Optimizer<S>(parse_optimizer(c.optimizer));
    state.opt.slots() = std::move(c.opt_slots);
    state.step = c.step;
    state.stage = c.stage;
    stream.seek(c.cursor);
    if (state.stage == Stage::ScOnly)
      state.opt.retain_only(trainable_names(state.params, Stage::ScOnly));
    copy_metrics_prefix(*resume_dir / "metrics.csv", csv, state.step);
  } else {
    state.params = init_params<S>(cfg.model_config(vocab.size()), cfg.seed);
    state.step = 0;
    state.stage = Stage::Hybrid;
  }

  RunManifest::write_initial(out_dir, cfg, vocab_hash);

  PrefetchingBatchSource source(std::move(stream),
                                static_cast<size_t>(cfg.prefetch_batches));

  RunResult result;
  result.run_dir = out_dir;
  std::uint64_t consumed = 0;

  auto save_at = [&](std::uint64_t completed) {
    const auto cursor = source.cursor_after(consumed);
    save_checkpoint(checkpoint_dir_for_step(out_dir, completed), cfg, vocab_hash, completed,
                    stage_at(completed, cfg.tau), state.params, state.opt, cursor);
  };

  for (std::uint64_t step = state.step; step < cfg.total_steps; ++step) {
    if (step == cfg.tau) {
      transition(state);
      RunManifest::record_transition(out_dir, step);
    }
    TokenMatrix batch = source.next();
    ++consumed;
    StepMetrics metrics;
    try {
      metrics = train_step(state, batch, vocab);
    } catch (const Error&) {
      // divergence guard: leave a state snapshot behind before aborting
      save_checkpoint(out_dir / ("diverged_step_" + std::to_string(step)), cfg, vocab_hash, step,
                      state.stage, state.params, state.opt, source.cursor_after(consumed));
      throw;
    }
    csv << metrics_csv_row(metrics) << '\n';
    result.metrics.push_back(metrics);
    const std::uint64_t completed = step + 1;
    if ((cfg.checkpoint_every > 0 && completed % cfg.checkpoint_every == 0) ||
        completed == cfg.total_steps)
      save_at(completed);
  }
  csv.flush();
  result.final_step = state.step;
  RunManifest::record_completion(out_dir);
  return result;
}

}  // namespace

std::string metrics_csv_header() {
  return "step,stage,lr,l_g,l_rtd,l_sc,total,tokens_per_step,gflops_per_step";
}

std::string metrics_csv_row(const StepMetrics& m) {
  std::ostringstream os;
  os << m.step << ',' << stage_name(m.stage) << ',' << fmt_double(m.lr) << ',';
  if (m.has_hybrid_terms) os << fmt_double(m.l_g);
  os << ',';
  if (m.has_hybrid_terms) os << fmt_double(m.l_rtd);
  os << ',' << fmt_double(m.l_sc) << ',' << fmt_double(m.total) << ',' << m.tokens_per_step << ','
     << fmt_double(m.gflops_per_step);
  return os.str();
}

RunResult run_pretrain(const TrainConfig& cfg, const std::filesystem::path& out_dir,
                       const std::optional<std::filesystem::path>& resume_dir) {
  cfg.validate();
  if (cfg.dtype == "f64") return run_impl<double>(cfg, out_dir, resume_dir);
  return run_impl<float>(cfg, out_dir, resume_dir);
}

}  // namespace spactor

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "spactor/evaluation.hpp"
#include "spactor/flops.hpp"
#include "spactor/regression.hpp"
#include "spactor/trainer.hpp"

namespace {

using namespace spactor;

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

void print_regression(std::ostream& os, const RegressionResult& r) {
  os << "beta0=" << fmt(r.beta0) << '\n'
     << "beta1=" << fmt(r.beta1) << '\n'
     << "stderr_beta0=" << fmt(r.stderr_beta0) << '\n'
     << "t_stat=" << fmt(r.t_stat) << '\n'
     << "p_value=" << fmt(r.p_value) << '\n'
     << "n_points=" << r.n_points << '\n';
}

int cmd_pretrain(const std::string& config_file, const std::string& out_dir,
                 const std::string& resume_dir) {
  TrainConfig cfg = TrainConfig::parse_file(config_file);
  std::optional<std::filesystem::path> resume;
  if (!resume_dir.empty()) resume = resume_dir;
  RunResult res = run_pretrain(cfg, out_dir, resume);
  std::cout << "run complete: " << res.run_dir.string() << " (" << res.final_step << " steps)\n";
  return 0;
}

int cmd_eval_gap(const std::string& run_a, const std::string& run_b, const std::string& mode,
                 std::uint64_t start_step, const std::string& val_corpus, std::int64_t seed,
                 int threads) {
  std::optional<std::filesystem::path> corpus;
  if (!val_corpus.empty()) corpus = val_corpus;
  std::optional<std::uint64_t> seed_opt;
  if (seed >= 0) seed_opt = static_cast<std::uint64_t>(seed);
  GapEvalResult res =
      eval_gap(run_a, run_b, parse_context_mode(mode), start_step, corpus, seed_opt, threads);
  std::cout << "step,loss_a,loss_b,gap\n";
  for (size_t i = 0; i < res.steps.size(); ++i)
    std::cout << static_cast<std::uint64_t>(res.steps[i]) << ',' << fmt(res.loss_a[i]) << ','
              << fmt(res.loss_b[i]) << ',' << fmt(res.series.gap[i]) << '\n';
  if (res.steps.size() >= 3) print_regression(std::cout, res.regression);
  return 0;
}

int cmd_flops(const std::string& config_file, std::uint64_t tau, std::uint64_t steps,
              std::uint64_t reference_steps) {
  TrainConfig cfg = TrainConfig::parse_file(config_file);
  // no corpus at hand: the configured vocabulary cap stands in for v
  ModelConfig mc = cfg.model_config(cfg.max_vocab);
  FlopsReport rep =
      flops_report(mc, cfg.input_len, cfg.r_sc, cfg.mu, cfg.batch_size, tau, steps,
                   reference_steps);
  std::cout << "baseline_gflops_per_step,hybrid_gflops_per_step,ratio,encoder_len,target_len,"
               "tau,total_steps,reference_steps,normalized_cumulative_flops\n";
  std::cout << fmt(rep.baseline_gflops_per_step) << ',' << fmt(rep.hybrid_gflops_per_step) << ','
            << fmt(rep.ratio) << ',' << rep.geometry.encoder_len << ',' << rep.geometry.target_len
            << ',' << rep.tau << ',' << rep.total_steps << ',' << rep.reference_steps << ','
            << fmt(rep.normalized_cumulative) << '\n';
  return 0;
}

int cmd_regress(const std::string& csv_file, const std::string& x_col, const std::string& y_col,
                double start_step) {
  std::ifstream in(csv_file);
  require(in.good(), "cannot open csv file: " + csv_file);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "empty csv file: " + csv_file);

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.push_back("");
    return out;
  };

  const auto header = split(line);
  int xi = -1, yi = -1;
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == x_col) xi = static_cast<int>(i);
    if (header[i] == y_col) yi = static_cast<int>(i);
  }
  require(xi >= 0, "csv has no column '" + x_col + "'");
  require(yi >= 0, "csv has no column '" + y_col + "'");

  std::vector<double> xs, ys;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (static_cast<int>(cells.size()) <= std::max(xi, yi)) continue;
    if (cells[xi].empty() || cells[yi].empty()) continue;
    const double x = std::stod(cells[xi]);
    if (x < start_step) continue;
    xs.push_back(x);
    ys.push_back(std::stod(cells[yi]));
  }
  print_regression(std::cout, ols_trend_test(xs, ys));
  return 0;
}

int cmd_dump_examples(const std::string& config_file, int count, std::int64_t seed_arg) {
  TrainConfig cfg = TrainConfig::parse_file(config_file);
  require(!cfg.corpus.empty(), "config key 'corpus' is required for dump-examples");
  const std::uint64_t seed = seed_arg >= 0 ? static_cast<std::uint64_t>(seed_arg) : cfg.seed;

  Vocabulary vocab = cfg.vocab.empty()
                         ? Vocabulary::build_from_file(cfg.corpus, cfg.max_vocab,
                                                       cfg.num_sentinels())
                         : Vocabulary::load(cfg.vocab);
  const TokenSeq ids = encode_corpus_file(cfg.corpus, vocab);
  const CorruptionConfig ccfg = cfg.corruption_config();
  const RngStream master = RngStream::named(seed, "dump");

  int emitted = 0;
  for (std::uint64_t chunk = 0; emitted < count; ++chunk) {
    const std::uint64_t begin = chunk * cfg.input_len;
    if (begin >= ids.size()) break;
    const std::uint64_t end = std::min(begin + cfg.input_len, ids.size());
    TokenView x(ids.data() + begin, end - begin);
    if (!corruptible(static_cast<int>(x.size()), ccfg.r_sc, ccfg.mu)) continue;
    RngStream rng = master.fork(chunk);
    CorruptedExample ex = corrupt_example(x, ccfg, rng, vocab);
    std::cout << vocab.decode(ex.original) << '\t' << vocab.decode(ex.sc_text) << '\t'
              << vocab.decode(ex.masked_text) << '\t' << vocab.decode(ex.target) << '\n';
    ++emitted;
  }
  require(emitted > 0, "corpus produced no corruptible examples");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpacTor pre-training: hybrid span-corruption + replaced-token-detection"};
  app.require_subcommand(1);

  std::string config_file, out_dir, resume_dir;
  auto* pretrain = app.add_subcommand("pretrain", "Run a two-stage pre-training job");
  pretrain->add_option("--config", config_file, "key=value config file")->required();
  pretrain->add_option("--out", out_dir, "output run directory")->required();
  pretrain->add_option("--resume", resume_dir, "run directory to resume from");

  std::string run_a, run_b, mode = "clean", val_corpus;
  std::uint64_t start_step = 0;
  std::int64_t eval_seed = -1;
  int threads = 1;
  auto* evalgap = app.add_subcommand("eval-gap", "Validation-loss gap between two runs");
  evalgap->add_option("--run-a", run_a, "first run directory")->required();
  evalgap->add_option("--run-b", run_b, "second run directory")->required();
  evalgap->add_option("--mode", mode, "encoder context: clean or noisy");
  evalgap->add_option("--start-step", start_step, "ignore checkpoints before this step");
  evalgap->add_option("--val-corpus", val_corpus, "validation corpus override");
  evalgap->add_option("--seed", eval_seed, "evaluation seed (default: run config seed)");
  evalgap->add_option("--threads", threads, "evaluation worker threads");

  std::string flops_config;
  std::uint64_t flops_tau = 0, flops_steps = 500000, flops_ref = 500000;
  auto* flops = app.add_subcommand("flops", "Per-step and normalized cumulative FLOPs");
  flops->add_option("--config", flops_config, "key=value config file")->required();
  flops->add_option("--tau", flops_tau, "stage-transition step")->required();
  flops->add_option("--steps", flops_steps, "total training steps")->required();
  flops->add_option("--reference-steps", flops_ref, "normalization reference (baseline steps)");

  std::string reg_csv, x_col = "step", y_col = "gap";
  double reg_start = 0.0;
  auto* regress = app.add_subcommand("regress", "OLS slope + t-test over CSV columns");
  regress->add_option("--csv", reg_csv, "input csv file")->required();
  regress->add_option("--x-col", x_col, "x column name");
  regress->add_option("--y-col", y_col, "y column name");
  regress->add_option("--start-step", reg_start, "drop rows with x below this");

  std::string dump_config;
  int dump_count = 10;
  std::int64_t dump_seed = -1;
  auto* dump = app.add_subcommand("dump-examples", "Print corrupted examples as TSV");
  dump->add_option("--config", dump_config, "key=value config file")->required();
  dump->add_option("--count", dump_count, "number of examples");
  dump->add_option("--seed", dump_seed, "corruption seed (default: config seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help() << '\n';
    std::cerr << "spactor: " << e.what() << '\n';
    return 2;
  }

  try {
    if (pretrain->parsed()) return cmd_pretrain(config_file, out_dir, resume_dir);
    if (evalgap->parsed())
      return cmd_eval_gap(run_a, run_b, mode, start_step, val_corpus, eval_seed, threads);
    if (flops->parsed()) return cmd_flops(flops_config, flops_tau, flops_steps, flops_ref);
    if (regress->parsed()) return cmd_regress(reg_csv, x_col, y_col, reg_start);
    if (dump->parsed()) return cmd_dump_examples(dump_config, dump_count, dump_seed);
  } catch (const std::exception& e) {
    std::cerr << "spactor: " << e.what() << '\n';
    return 1;
  }
  std::cerr << app.help() << '\n';
  return 2;
}

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "spactor/corruption.hpp"
#include "spactor/model_config.hpp"
#include "spactor/objectives.hpp"

namespace spactor {

inline constexpr std::uint64_t kTauInfinity = UINT64_MAX;
inline constexpr const char* kVersionTag = "spactor 0.1.0";

/// One flat key=value file per run. Keys mirror the architecture /
/// pre-training table names (disc_layers, r_sc, mu, lambda1, ...); unknown
/// keys are rejected. tau accepts "inf" for the hybrid-only regime.
struct TrainConfig {
  // model
  int d = 64;
  int disc_layers = 2;
  int disc_heads = 4;
  int disc_mlp = 128;
  int gen_layers = 1;
  int gen_mlp = 64;
  int rtd_mlp = 128;
  int max_len = 0;  // 0 = derived from input_len
  std::string dtype = "f32";

  // data
  std::string corpus;
  std::string val_corpus;
  std::string vocab;  // optional pre-built vocabulary file
  int max_vocab = 4096;
  int input_len = 128;
  int batch_size = 8;

  // corruption
  double r_sc = 0.15;
  double mu = 3.0;
  double r_mlm = 0.15;

  // objective
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  std::string loss_reduction = "mean";

  // schedule
  std::uint64_t tau = kTauInfinity;
  std::uint64_t total_steps = 100;
  std::uint64_t kappa = 10000;
  std::string optimizer = "adafactor";

  // run
  std::uint64_t seed = 1;
  std::uint64_t checkpoint_every = 0;  // 0 = final checkpoint only
  int prefetch_batches = 0;
  int eval_threads = 1;

  static TrainConfig parse_file(const std::filesystem::path& file);
  static TrainConfig parse_text(const std::string& text,
                                const std::filesystem::path& base_dir = {});

  void validate() const;

  ModelConfig model_config(int vocab_size) const;
  CorruptionConfig corruption_config() const;
  Reduction reduction() const { return parse_reduction(loss_reduction); }
  int effective_max_len() const { return max_len > 0 ? max_len : input_len; }
  /// Sentinel budget: ceil(input_len * r_sc) + 1; the planner can never need
  /// more and errors loudly if it somehow does.
  int num_sentinels() const;
  bool stage_is_hybrid(std::uint64_t step) const { return step < tau; }

  /// Canonical sorted key=value rendering; identical configs render
  /// identically, so the hash pins the run setup.
  std::string canonical_text() const;
  std::uint64_t config_hash() const;
};

/// Self-description written into each run directory and updated at the
/// stage transition and at completion.
struct RunManifest {
  static void write_initial(const std::filesystem::path& run_dir, const TrainConfig& cfg,
                            std::uint64_t vocab_hash);
  static void record_transition(const std::filesystem::path& run_dir, std::uint64_t step);
  static void record_completion(const std::filesystem::path& run_dir);
};

}  // namespace spactor

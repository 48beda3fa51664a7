#pragma once

#include <cstdint>

#include "spactor/model_config.hpp"

namespace spactor {

/// Expected sequence geometry under span corruption: budget B, span count p,
/// encoder length n (padded batches run at full input_len) and decoder
/// target length t = B + p + 1.
struct CorruptionGeometry {
  int budget = 0;
  int spans = 0;
  int encoder_len = 0;
  int target_len = 0;
};
CorruptionGeometry corruption_geometry(int input_len, double r_sc, double mu);

/// Hardware-independent training cost model.
///
/// Each component is charged 6 * P * T FLOPs per sequence: P its weight-
/// matrix parameter count, T the tokens flowing through it (input_len for
/// encoder-side components, the expected target length for the decoder and
/// its tied output projection), 2 FLOPs per multiply-accumulate and a 1:2
/// forward:backward split. Embedding gathers, attention score/context
/// products and elementwise ops are excluded by convention; at the Base
/// geometry they are a few percent of the total.
///
/// The hybrid stage additionally runs (and trains) the generator encoder,
/// its vocabulary projection and the RTD head; the SC-only stage equals the
/// baseline by construction.
double flops_per_step_gflops(const ModelConfig& cfg, int input_len, double r_sc, double mu,
                             int batch_size, bool hybrid_stage);

/// Cumulative training FLOPs of a two-stage run, normalized to
/// `reference_steps` baseline steps (the baseline-500K = 1.0 convention).
/// tau beyond total_steps (or infinite) means hybrid throughout.
double normalized_cumulative_flops(std::uint64_t tau, std::uint64_t total_steps, double ratio,
                                   std::uint64_t reference_steps = 500000);

struct FlopsReport {
  double baseline_gflops_per_step = 0.0;
  double hybrid_gflops_per_step = 0.0;
  double ratio = 0.0;
  CorruptionGeometry geometry;
  std::uint64_t tau = 0;
  std::uint64_t total_steps = 0;
  std::uint64_t reference_steps = 0;
  double normalized_cumulative = 0.0;
};

FlopsReport flops_report(const ModelConfig& cfg, int input_len, double r_sc, double mu,
                         int batch_size, std::uint64_t tau, std::uint64_t total_steps,
                         std::uint64_t reference_steps = 500000);

}  // namespace spactor

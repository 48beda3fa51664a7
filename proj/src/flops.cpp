#include "spactor/flops.hpp"

#include <algorithm>
#include <cmath>

#include "spactor/common.hpp"

namespace spactor {

CorruptionGeometry corruption_geometry(int input_len, double r_sc, double mu) {
  CorruptionGeometry geo;
  geo.budget = std::max(1, static_cast<int>(std::llround(input_len * r_sc)));
  geo.spans = std::max(1, static_cast<int>(std::llround(geo.budget / mu)));
  geo.spans = std::min(geo.spans, geo.budget);
  geo.encoder_len = input_len;
  geo.target_len = geo.budget + geo.spans + 1;
  return geo;
}

double flops_per_step_gflops(const ModelConfig& cfg, int input_len, double r_sc, double mu,
                             int batch_size, bool hybrid_stage) {
  require(input_len >= 1 && batch_size >= 1, "flops: invalid geometry");
  const CorruptionGeometry geo = corruption_geometry(input_len, r_sc, mu);
  const ComponentParams p = component_params(cfg);

  const double n = geo.encoder_len;
  const double t = geo.target_len;

  double param_tokens = static_cast<double>(p.disc_encoder) * n +
                        static_cast<double>(p.disc_decoder) * t +
                        static_cast<double>(p.disc_tied_proj) * t;
  if (hybrid_stage) {
    param_tokens += static_cast<double>(p.gen_encoder) * n +
                    static_cast<double>(p.gen_proj) * n +
                    static_cast<double>(p.rtd_head) * n;
  }
  return 6.0 * param_tokens * batch_size / 1e9;
}

double normalized_cumulative_flops(std::uint64_t tau, std::uint64_t total_steps, double ratio,
                                   std::uint64_t reference_steps) {
  require(reference_steps >= 1, "flops: reference_steps must be >= 1");
  const double hybrid_steps = static_cast<double>(std::min(tau, total_steps));
  const double sc_steps = static_cast<double>(total_steps) - hybrid_steps;
  return (hybrid_steps * ratio + sc_steps) / static_cast<double>(reference_steps);
}

FlopsReport flops_report(const ModelConfig& cfg, int input_len, double r_sc, double mu,
                         int batch_size, std::uint64_t tau, std::uint64_t total_steps,
                         std::uint64_t reference_steps) {
  FlopsReport rep;
  rep.baseline_gflops_per_step =
      flops_per_step_gflops(cfg, input_len, r_sc, mu, batch_size, false);
  rep.hybrid_gflops_per_step = flops_per_step_gflops(cfg, input_len, r_sc, mu, batch_size, true);
  rep.ratio = rep.hybrid_gflops_per_step / rep.baseline_gflops_per_step;
  rep.geometry = corruption_geometry(input_len, r_sc, mu);
  rep.tau = tau;
  rep.total_steps = total_steps;
  rep.reference_steps = reference_steps;
  rep.normalized_cumulative =
      normalized_cumulative_flops(tau, total_steps, rep.ratio, reference_steps);
  return rep;
}

}  // namespace spactor

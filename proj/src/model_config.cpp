#include "spactor/model_config.hpp"

#include "spactor/common.hpp"

namespace spactor {

void ModelConfig::validate() const {
  require(d >= 2, "model: d must be >= 2");
  require(v >= 8, "model: vocabulary too small");
  require(disc_layers >= 1 && gen_layers >= 1, "model: layer counts must be >= 1");
  require(disc_heads >= 1 && d % disc_heads == 0, "model: d must be divisible by disc_heads");
  require(disc_mlp >= 1 && gen_mlp >= 1 && rtd_mlp >= 1, "model: MLP widths must be >= 1");
  require(gen_layers <= disc_layers && gen_mlp <= disc_mlp &&
              (gen_layers < disc_layers || gen_mlp < disc_mlp),
          "model: generator must be strictly smaller than the discriminator encoder");
  require(max_len >= 8, "model: max_len must be >= 8");
  require(dtype == "f32" || dtype == "f64", "model: dtype must be f32 or f64");
}

namespace {
std::int64_t encoder_stack_params(std::int64_t layers, std::int64_t d, std::int64_t mlp) {
  return layers * (4 * d * d + 2 * d * mlp + 2 * d) + d;
}
std::int64_t decoder_stack_params(std::int64_t layers, std::int64_t d, std::int64_t mlp) {
  return layers * (8 * d * d + 2 * d * mlp + 3 * d) + d;
}
}  // namespace

std::int64_t param_count(const ModelConfig& cfg) {
  const std::int64_t d = cfg.d, v = cfg.v;
  std::int64_t total = v * d;  // embedder
  total += encoder_stack_params(cfg.gen_layers, d, cfg.gen_mlp);
  total += d * v;  // generator projection
  total += encoder_stack_params(cfg.disc_layers, d, cfg.disc_mlp);
  total += decoder_stack_params(cfg.disc_layers, d, cfg.disc_mlp);
  total += d * cfg.rtd_mlp + cfg.rtd_mlp + cfg.rtd_mlp + 1;
  return total;
}

ComponentParams component_params(const ModelConfig& cfg) {
  const std::int64_t d = cfg.d, v = cfg.v;
  ComponentParams p;
  p.disc_encoder = encoder_stack_params(cfg.disc_layers, d, cfg.disc_mlp);
  p.disc_decoder = decoder_stack_params(cfg.disc_layers, d, cfg.disc_mlp);
  p.disc_tied_proj = d * v;
  p.gen_encoder = cfg.gen_layers > 0 ? encoder_stack_params(cfg.gen_layers, d, cfg.gen_mlp) : 0;
  p.gen_proj = cfg.gen_layers > 0 ? d * v : 0;
  p.rtd_head = cfg.rtd_mlp > 0 ? d * cfg.rtd_mlp + 2 * cfg.rtd_mlp + 1 : 0;
  return p;
}

}  // namespace spactor

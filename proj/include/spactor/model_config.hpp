#pragma once

#include <cstdint>
#include <string>

namespace spactor {

/// Architecture hyperparameters for the generator / discriminator pair.
/// The generator reuses the discriminator head count; it must be strictly
/// smaller than the discriminator encoder in depth or MLP width.
struct ModelConfig {
  int d = 64;          // shared hidden dimension
  int v = 0;           // vocabulary size (includes specials)
  int disc_layers = 2; // discriminator encoder AND decoder depth
  int disc_heads = 4;
  int disc_mlp = 128;
  int gen_layers = 1;
  int gen_mlp = 64;
  int rtd_mlp = 128;
  int max_len = 512;
  std::string dtype = "f32";  // f32 for training, f64 for gradient checks

  void validate() const;
};

/// Exact trainable-parameter count:
///   embedder                 v*d
///   encoder stack(L, m)      L*(4d^2 + 2dm + 2d) + d     (norm gains incl.)
///   decoder stack(L, m)      L*(8d^2 + 2dm + 3d) + d
///   generator projection     d*v
///   RTD head                 d*r + r + r + 1
/// for generator encoder (gen_layers, gen_mlp), discriminator encoder and
/// decoder (disc_layers, disc_mlp), RTD width r = rtd_mlp. The decoder
/// output projection is tied to the embedder and adds nothing.
std::int64_t param_count(const ModelConfig& cfg);

/// Weight-matrix parameters per component, used by the FLOPs model.
struct ComponentParams {
  std::int64_t disc_encoder = 0;
  std::int64_t disc_decoder = 0;
  std::int64_t disc_tied_proj = 0;  // d*v matmul against the shared embedder
  std::int64_t gen_encoder = 0;
  std::int64_t gen_proj = 0;
  std::int64_t rtd_head = 0;
};
ComponentParams component_params(const ModelConfig& cfg);

}  // namespace spactor

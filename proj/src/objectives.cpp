#include "spactor/objectives.hpp"

namespace spactor {

Reduction parse_reduction(const std::string& s) {
  if (s == "mean") return Reduction::TokenMean;
  if (s == "sum") return Reduction::ExampleSumMean;
  throw Error("loss_reduction must be 'mean' or 'sum', got '" + s + "'");
}

std::string reduction_name(Reduction r) {
  return r == Reduction::TokenMean ? "mean" : "sum";
}

HybridLossBreakdown hybrid_loss(double l_g, double l_rtd, double l_sc, double lambda1,
                                double lambda2) {
  require(lambda1 >= 0.0 && lambda2 >= 0.0, "loss weights must be nonnegative");
  HybridLossBreakdown b;
  b.l_g = l_g;
  b.l_rtd = l_rtd;
  b.l_sc = l_sc;
  b.lambda1 = lambda1;
  b.lambda2 = lambda2;
  b.total = l_g + lambda1 * l_rtd + lambda2 * l_sc;
  return b;
}

}  // namespace spactor

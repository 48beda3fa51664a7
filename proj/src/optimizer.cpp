#include "spactor/optimizer.hpp"

namespace spactor {

OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adafactor") return OptimizerKind::Adafactor;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw Error("optimizer must be 'adafactor' or 'sgd', got '" + s + "'");
}

std::string optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::Adafactor ? "adafactor" : "sgd";
}

}  // namespace spactor

#pragma once

#include <string>
#include <vector>

#include "spactor/common.hpp"
#include "spactor/graph.hpp"

namespace spactor {

/// How per-position losses reduce to a scalar.
///   TokenMean:      sum over supervised positions / count of those positions
///                   (default; keeps lambda weights length- and batch-invariant)
///   ExampleSumMean: sum per example / batch size (the literal expectation of
///                   sums form the equations are written in)
enum class Reduction { TokenMean, ExampleSumMean };

Reduction parse_reduction(const std::string& s);
std::string reduction_name(Reduction r);

/// The weighted three-term loss and its ingredients.
struct HybridLossBreakdown {
  double l_g = 0.0;
  double l_rtd = 0.0;
  double l_sc = 0.0;
  double total = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  // supervised-position counts used for normalization
  std::int64_t mlm_tokens = 0;
  std::int64_t rtd_positions = 0;
  std::int64_t target_tokens = 0;
};

/// total = l_g + lambda1 * l_rtd + lambda2 * l_sc, computed in double.
HybridLossBreakdown hybrid_loss(double l_g, double l_rtd, double l_sc, double lambda1,
                                double lambda2);

// ------------------------------------------------------- graph-level losses
// Each builder returns a scalar node that is the SUM over supervised
// positions of the batch; `finalize_reduction` divides by the right count.
// Value-only callers can read the node value without running backward.

/// Cross-entropy of the generator at MLM positions only: row r supervises
/// targets[r][k] at position positions[r][k].
struct GeneratorLossBatch {
  std::vector<NodeId> logits;                  // per row, [n x v]
  std::vector<std::vector<int>> positions;     // MLM positions per row
  std::vector<std::vector<int>> target_ids;    // original tokens at those positions
};

template <class S>
NodeId generator_loss_sum(Graph<S>& g, const GeneratorLossBatch& batch,
                          std::int64_t* count_out) {
  NodeId total = g.leaf(Mat<S>::Zero(1, 1));
  std::int64_t count = 0;
  for (size_t r = 0; r < batch.logits.size(); ++r) {
    const auto& pos = batch.positions[r];
    require(pos.size() == batch.target_ids[r].size(), "generator loss: position/target mismatch");
    if (pos.empty()) continue;
    const Eigen::Index n = g.value(batch.logits[r]).rows();
    std::vector<int> targets(n, 0);
    std::vector<S> weights(n, S(0));
    for (size_t k = 0; k < pos.size(); ++k) {
      require(pos[k] >= 0 && static_cast<Eigen::Index>(pos[k]) < n,
              "generator loss: MLM position out of range");
      targets[pos[k]] = batch.target_ids[r][k];
      weights[pos[k]] = S(1);
      ++count;
    }
    total = g.add(total, g.softmax_xent_sum(batch.logits[r], std::move(targets), std::move(weights)));
  }
  if (count_out) *count_out = count;
  return total;
}

/// Binary cross-entropy of RTD probabilities over valid (non-pad) positions.
/// Label true = replaced, costing -log(1 - p); false costs -log(p).
template <class S>
NodeId rtd_loss_sum(Graph<S>& g, const std::vector<NodeId>& probs,
                    const std::vector<std::vector<std::uint8_t>>& labels,
                    const std::vector<std::vector<std::uint8_t>>& valid,
                    std::int64_t* count_out) {
  require(probs.size() == labels.size() && probs.size() == valid.size(),
          "rtd loss: batch size mismatch");
  NodeId total = g.leaf(Mat<S>::Zero(1, 1));
  std::int64_t count = 0;
  for (size_t r = 0; r < probs.size(); ++r) {
    const Eigen::Index n = g.value(probs[r]).rows();
    require(static_cast<Eigen::Index>(labels[r].size()) == n &&
                static_cast<Eigen::Index>(valid[r].size()) == n,
            "rtd loss: shape mismatch");
    std::vector<S> weights(n, S(0));
    for (Eigen::Index i = 0; i < n; ++i) {
      if (valid[r][i]) {
        weights[i] = S(1);
        ++count;
      }
    }
    total = g.add(total, g.bce_probs_sum(probs[r], labels[r], std::move(weights)));
  }
  if (count_out) *count_out = count;
  return total;
}

/// Token-level cross-entropy of the decoder over non-pad target positions
/// (sentinels, span tokens and the closing EOS are all supervised).
template <class S>
NodeId sc_loss_sum(Graph<S>& g, const std::vector<NodeId>& dec_logits,
                   const std::vector<std::vector<int>>& targets,
                   const std::vector<std::vector<std::uint8_t>>& valid,
                   std::int64_t* count_out) {
  require(dec_logits.size() == targets.size() && dec_logits.size() == valid.size(),
          "sc loss: batch size mismatch");
  NodeId total = g.leaf(Mat<S>::Zero(1, 1));
  std::int64_t count = 0;
  for (size_t r = 0; r < dec_logits.size(); ++r) {
    const Eigen::Index t = g.value(dec_logits[r]).rows();
    require(static_cast<Eigen::Index>(targets[r].size()) == t &&
                static_cast<Eigen::Index>(valid[r].size()) == t,
            "sc loss: shape mismatch");
    std::vector<S> weights(t, S(0));
    for (Eigen::Index i = 0; i < t; ++i) {
      if (valid[r][i]) {
        weights[i] = S(1);
        ++count;
      }
    }
    total = g.add(total, g.softmax_xent_sum(dec_logits[r], targets[r], std::move(weights)));
  }
  if (count_out) *count_out = count;
  return total;
}

/// Divide a summed loss node by the reduction denominator. A zero count
/// yields a zero node (flagged upstream via the breakdown counts).
template <class S>
NodeId finalize_reduction(Graph<S>& g, NodeId sum_node, Reduction reduction, std::int64_t count,
                          std::int64_t batch_size) {
  const std::int64_t denom = reduction == Reduction::TokenMean ? count : batch_size;
  if (denom <= 0) return g.leaf(Mat<S>::Zero(1, 1));
  return g.scale(sum_node, S(1) / static_cast<S>(denom));
}

// ----------------------------------------------------- value-only wrappers
// Spec-shaped loss evaluation on plain matrices; used by tests and bindings.

/// Mean (per `reduction`) of -log p_G at MLM positions. Returns 0 with
/// *count_out == 0 when the batch has no MLM positions.
template <class S>
double loss_generator(const std::vector<Mat<S>>& gen_logits,
                      const std::vector<std::vector<int>>& mlm_positions,
                      const std::vector<std::vector<int>>& original_tokens,
                      Reduction reduction = Reduction::TokenMean,
                      std::int64_t* count_out = nullptr) {
  Graph<S> g;
  GeneratorLossBatch batch;
  for (const auto& m : gen_logits) batch.logits.push_back(g.leaf(m));
  batch.positions = mlm_positions;
  batch.target_ids = original_tokens;
  std::int64_t count = 0;
  NodeId sum = generator_loss_sum(g, batch, &count);
  NodeId out = finalize_reduction(g, sum, reduction, count,
                                  static_cast<std::int64_t>(gen_logits.size()));
  if (count_out) *count_out = count;
  return static_cast<double>(g.value(out)(0, 0));
}

template <class S>
double loss_rtd(const std::vector<Vec<S>>& probs,
                const std::vector<std::vector<std::uint8_t>>& labels,
                const std::vector<std::vector<std::uint8_t>>& valid,
                Reduction reduction = Reduction::TokenMean, std::int64_t* count_out = nullptr) {
  Graph<S> g;
  std::vector<NodeId> nodes;
  for (const auto& p : probs) {
    Mat<S> col = p;
    nodes.push_back(g.leaf(std::move(col)));
  }
  std::int64_t count = 0;
  NodeId sum = rtd_loss_sum(g, nodes, labels, valid, &count);
  NodeId out =
      finalize_reduction(g, sum, reduction, count, static_cast<std::int64_t>(probs.size()));
  if (count_out) *count_out = count;
  return static_cast<double>(g.value(out)(0, 0));
}

template <class S>
double loss_sc(const std::vector<Mat<S>>& dec_logits, const std::vector<std::vector<int>>& targets,
               const std::vector<std::vector<std::uint8_t>>& valid,
               Reduction reduction = Reduction::TokenMean, std::int64_t* count_out = nullptr) {
  Graph<S> g;
  std::vector<NodeId> nodes;
  for (const auto& m : dec_logits) nodes.push_back(g.leaf(m));
  std::int64_t count = 0;
  NodeId sum = sc_loss_sum(g, nodes, targets, valid, &count);
  NodeId out =
      finalize_reduction(g, sum, reduction, count, static_cast<std::int64_t>(dec_logits.size()));
  if (count_out) *count_out = count;
  return static_cast<double>(g.value(out)(0, 0));
}

}  // namespace spactor

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <vector>

#include "spactor/common.hpp"

namespace spactor {

using NodeId = int;
using ByteMask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Reverse-mode tape over dense Eigen matrices.
///
/// Nodes are appended in topological order, so backward() is a single reverse
/// sweep. One Graph instance per training step; parameters enter as leaves
/// and their gradients are read back after backward(). All ops used by the
/// model are smooth, which keeps central-difference gradient checks exact to
/// roundoff in double precision.
template <class S>
class Graph {
 public:
  NodeId leaf(Mat<S> value, bool needs_grad = false) {
    return push(std::move(value), needs_grad, nullptr);
  }

  const Mat<S>& value(NodeId id) const { return nodes_[id].value; }
  const Mat<S>& grad(NodeId id) const { return nodes_[id].grad; }
  bool needs_grad(NodeId id) const { return nodes_[id].needs_grad; }
  int size() const { return static_cast<int>(nodes_.size()); }

  /// Seed d(root)/d(root) = 1 and sweep the tape in reverse. `root` must be
  /// a 1x1 scalar node.
  void backward(NodeId root) {
    require(nodes_[root].value.rows() == 1 && nodes_[root].value.cols() == 1,
            "backward root must be a scalar node");
    for (auto& n : nodes_)
      if (n.needs_grad) n.grad.setZero(n.value.rows(), n.value.cols());
    if (!nodes_[root].needs_grad) return;
    nodes_[root].grad(0, 0) = S(1);
    for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
      if (nodes_[i].back && nodes_[i].needs_grad) nodes_[i].back(*this);
  }

  // ---------------------------------------------------------------- ops

  NodeId add(NodeId a, NodeId b) {
    Mat<S> v = value(a) + value(b);
    return push(std::move(v), needs_grad(a) || needs_grad(b), [a, b](Graph& g, const Node& out) {
      if (g.needs_grad(a)) g.nodes_[a].grad += out.grad;
      if (g.needs_grad(b)) g.nodes_[b].grad += out.grad;
    });
  }

  NodeId scale(NodeId a, S factor) {
    Mat<S> v = value(a) * factor;
    return push(std::move(v), needs_grad(a), [a, factor](Graph& g, const Node& out) {
      if (g.needs_grad(a)) g.nodes_[a].grad += out.grad * factor;
    });
  }

  NodeId matmul(NodeId a, NodeId b) {
    Mat<S> v = value(a) * value(b);
    return push(std::move(v), needs_grad(a) || needs_grad(b), [a, b](Graph& g, const Node& out) {
      if (g.needs_grad(a)) g.nodes_[a].grad.noalias() += out.grad * g.value(b).transpose();
      if (g.needs_grad(b)) g.nodes_[b].grad.noalias() += g.value(a).transpose() * out.grad;
    });
  }

  NodeId transpose(NodeId a) {
    Mat<S> v = value(a).transpose();
    return push(std::move(v), needs_grad(a), [a](Graph& g, const Node& out) {
      if (g.needs_grad(a)) g.nodes_[a].grad += out.grad.transpose();
    });
  }

  /// x [r x c] plus a [1 x c] bias row broadcast over rows.
  NodeId add_row_broadcast(NodeId x, NodeId bias) {
    Mat<S> v = value(x);
    v.rowwise() += value(bias).row(0);
    return push(std::move(v), needs_grad(x) || needs_grad(bias),
                [x, bias](Graph& g, const Node& out) {
                  if (g.needs_grad(x)) g.nodes_[x].grad += out.grad;
                  if (g.needs_grad(bias))
                    g.nodes_[bias].grad.row(0) += out.grad.colwise().sum();
                });
  }

  /// Column block [start, start+n).
  NodeId cols(NodeId x, int start, int n) {
    Mat<S> v = value(x).middleCols(start, n);
    return push(std::move(v), needs_grad(x), [x, start, n](Graph& g, const Node& out) {
      if (g.needs_grad(x)) g.nodes_[x].grad.middleCols(start, n) += out.grad;
    });
  }

  NodeId hconcat(const std::vector<NodeId>& parts) {
    require(!parts.empty(), "hconcat: empty");
    Eigen::Index rows = value(parts[0]).rows(), total = 0;
    bool any_grad = false;
    for (NodeId p : parts) {
      total += value(p).cols();
      any_grad = any_grad || needs_grad(p);
    }
    Mat<S> v(rows, total);
    Eigen::Index off = 0;
    for (NodeId p : parts) {
      v.middleCols(off, value(p).cols()) = value(p);
      off += value(p).cols();
    }
    return push(std::move(v), any_grad, [parts](Graph& g, const Node& out) {
      Eigen::Index off = 0;
      for (NodeId p : parts) {
        Eigen::Index w = g.value(p).cols();
        if (g.needs_grad(p)) g.nodes_[p].grad += out.grad.middleCols(off, w);
        off += w;
      }
    });
  }

  /// Row gather: out.row(i) = table.row(ids[i]). Backward scatter-adds.
  NodeId embedding_rows(NodeId table, std::vector<int> ids) {
    Mat<S> v(static_cast<Eigen::Index>(ids.size()), value(table).cols());
    for (size_t i = 0; i < ids.size(); ++i) v.row(i) = value(table).row(ids[i]);
    auto idx = std::make_shared<std::vector<int>>(std::move(ids));
    return push(std::move(v), needs_grad(table), [table, idx](Graph& g, const Node& out) {
      if (!g.needs_grad(table)) return;
      for (size_t i = 0; i < idx->size(); ++i)
        g.nodes_[table].grad.row((*idx)[i]) += out.grad.row(i);
    });
  }

  /// y_ij = x_ij * gain_j / rms_i with rms_i = sqrt(mean_j x_ij^2 + eps).
  NodeId rmsnorm(NodeId x, NodeId gain, S eps = S(1e-6)) {
    const Mat<S>& xv = value(x);
    const Eigen::Index r = xv.rows(), c = xv.cols();
    auto inv_rms = std::make_shared<Vec<S>>(r);
    for (Eigen::Index i = 0; i < r; ++i)
      (*inv_rms)(i) = S(1) / std::sqrt(xv.row(i).squaredNorm() / S(c) + eps);
    Mat<S> v = (xv.array().colwise() * inv_rms->array()).rowwise() *
               value(gain).row(0).array();
    return push(std::move(v), needs_grad(x) || needs_grad(gain),
                [x, gain, inv_rms](Graph& g, const Node& out) {
                  const Mat<S>& xv = g.value(x);
                  const Eigen::Index r = xv.rows(), c = xv.cols();
                  const auto gain_row = g.value(gain).row(0);
                  if (g.needs_grad(gain)) {
                    for (Eigen::Index i = 0; i < r; ++i)
                      g.nodes_[gain].grad.row(0) +=
                          (out.grad.row(i).array() * xv.row(i).array() * (*inv_rms)(i)).matrix();
                  }
                  if (g.needs_grad(x)) {
                    for (Eigen::Index i = 0; i < r; ++i) {
                      const S ir = (*inv_rms)(i);
                      // d/dx of x*ir(x): ir * I - ir^3/c * x x^T, then gain
                      auto go = (out.grad.row(i).array() * gain_row.array()).matrix();
                      const S dot = go.dot(xv.row(i));
                      g.nodes_[x].grad.row(i) +=
                          go * ir - xv.row(i) * (dot * ir * ir * ir / S(c));
                    }
                  }
                });
  }

  /// Exact (erf-based) GELU, smooth everywhere.
  NodeId gelu(NodeId x) {
    const Mat<S>& xv = value(x);
    Mat<S> v = xv.unaryExpr([](S t) {
      const double td = static_cast<double>(t);
      return static_cast<S>(0.5 * td * (1.0 + std::erf(td / std::numbers::sqrt2)));
    });
    return push(std::move(v), needs_grad(x), [x](Graph& g, const Node& out) {
      if (!g.needs_grad(x)) return;
      const Mat<S>& xv = g.value(x);
      Mat<S> d = xv.unaryExpr([](S t) {
        const double td = static_cast<double>(t);
        const double phi = std::exp(-0.5 * td * td) / std::sqrt(2.0 * std::numbers::pi);
        return static_cast<S>(0.5 * (1.0 + std::erf(td / std::numbers::sqrt2)) + td * phi);
      });
      g.nodes_[x].grad.array() += out.grad.array() * d.array();
    });
  }

  NodeId sigmoid(NodeId x) {
    Mat<S> v = value(x).unaryExpr([](S t) {
      return t >= S(0) ? S(1) / (S(1) + std::exp(-t)) : std::exp(t) / (S(1) + std::exp(t));
    });
    auto cache = std::make_shared<Mat<S>>(v);
    return push(std::move(v), needs_grad(x), [x, cache](Graph& g, const Node& out) {
      if (!g.needs_grad(x)) return;
      g.nodes_[x].grad.array() +=
          out.grad.array() * cache->array() * (S(1) - cache->array());
    });
  }

  /// Row-wise softmax restricted to positions where mask != 0; masked
  /// entries get probability 0. An all-masked row yields a zero row.
  NodeId masked_softmax_rows(NodeId x, const ByteMask& mask) {
    const Mat<S>& xv = value(x);
    require(mask.rows() == xv.rows() && mask.cols() == xv.cols(),
            "masked_softmax_rows: mask shape mismatch");
    Mat<S> v(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      S m = std::numeric_limits<S>::lowest();
      for (Eigen::Index j = 0; j < xv.cols(); ++j)
        if (mask(i, j)) m = std::max(m, xv(i, j));
      S sum = S(0);
      for (Eigen::Index j = 0; j < xv.cols(); ++j) {
        if (mask(i, j)) {
          v(i, j) = std::exp(xv(i, j) - m);
          sum += v(i, j);
        } else {
          v(i, j) = S(0);
        }
      }
      if (sum > S(0)) v.row(i) /= sum;
    }
    auto probs = std::make_shared<Mat<S>>(v);
    auto mk = std::make_shared<ByteMask>(mask);
    return push(std::move(v), needs_grad(x), [x, probs, mk](Graph& g, const Node& out) {
      if (!g.needs_grad(x)) return;
      for (Eigen::Index i = 0; i < probs->rows(); ++i) {
        const S dot = out.grad.row(i).dot(probs->row(i));
        for (Eigen::Index j = 0; j < probs->cols(); ++j)
          if ((*mk)(i, j))
            g.nodes_[x].grad(i, j) += (*probs)(i, j) * (out.grad(i, j) - dot);
      }
    });
  }

  /// Sum over rows of weight_i * (logsumexp(logits_i) - logits_i[target_i]).
  /// Rows with weight 0 contribute nothing. Returns a 1x1 node.
  NodeId softmax_xent_sum(NodeId logits, std::vector<int> targets, std::vector<S> weights) {
    const Mat<S>& lv = value(logits);
    require(static_cast<Eigen::Index>(targets.size()) == lv.rows() &&
                targets.size() == weights.size(),
            "softmax_xent_sum: row count mismatch");
    auto probs = std::make_shared<Mat<S>>(lv.rows(), lv.cols());
    S total = S(0);
    for (Eigen::Index i = 0; i < lv.rows(); ++i) {
      const S m = lv.row(i).maxCoeff();
      Eigen::Array<S, 1, Eigen::Dynamic> e = (lv.row(i).array() - m).exp();
      const S z = e.sum();
      probs->row(i) = (e / z).matrix();
      if (weights[i] != S(0)) {
        require(targets[i] >= 0 && targets[i] < lv.cols(), "softmax_xent_sum: target id out of range");
        total += weights[i] * (std::log(z) + m - lv(i, targets[i]));
      }
    }
    Mat<S> v(1, 1);
    v(0, 0) = total;
    auto tg = std::make_shared<std::vector<int>>(std::move(targets));
    auto wt = std::make_shared<std::vector<S>>(std::move(weights));
    return push(std::move(v), needs_grad(logits),
                [logits, probs, tg, wt](Graph& g, const Node& out) {
                  if (!g.needs_grad(logits)) return;
                  const S go = out.grad(0, 0);
                  for (Eigen::Index i = 0; i < probs->rows(); ++i) {
                    const S w = (*wt)[i];
                    if (w == S(0)) continue;
                    g.nodes_[logits].grad.row(i) += go * w * probs->row(i);
                    g.nodes_[logits].grad(i, (*tg)[i]) -= go * w;
                  }
                });
  }

  /// Sum over rows of weight_i * BCE(probs_i, label_i) where label true means
  /// "replaced" and costs -log(1 - p). `probs` is [n x 1]. Returns 1x1.
  NodeId bce_probs_sum(NodeId probs, std::vector<std::uint8_t> labels, std::vector<S> weights) {
    const Mat<S>& pv = value(probs);
    require(pv.cols() == 1, "bce_probs_sum: probs must be a column");
    require(static_cast<Eigen::Index>(labels.size()) == pv.rows() &&
                labels.size() == weights.size(),
            "bce_probs_sum: row count mismatch");
    S total = S(0);
    for (Eigen::Index i = 0; i < pv.rows(); ++i) {
      if (weights[i] == S(0)) continue;
      const S p = pv(i, 0);
      total += weights[i] * (labels[i] ? -std::log(S(1) - p) : -std::log(p));
    }
    Mat<S> v(1, 1);
    v(0, 0) = total;
    auto lb = std::make_shared<std::vector<std::uint8_t>>(std::move(labels));
    auto wt = std::make_shared<std::vector<S>>(std::move(weights));
    return push(std::move(v), needs_grad(probs),
                [probs, lb, wt](Graph& g, const Node& out) {
                  if (!g.needs_grad(probs)) return;
                  const S go = out.grad(0, 0);
                  const Mat<S>& pv = g.value(probs);
                  for (Eigen::Index i = 0; i < pv.rows(); ++i) {
                    const S w = (*wt)[i];
                    if (w == S(0)) continue;
                    const S p = pv(i, 0);
                    g.nodes_[probs].grad(i, 0) +=
                        go * w * ((*lb)[i] ? S(1) / (S(1) - p) : -S(1) / p);
                  }
                });
  }

 private:
  struct Node {
    Mat<S> value;
    Mat<S> grad;
    bool needs_grad = false;
    std::function<void(Graph&)> back;
  };

  std::vector<Node> nodes_;

  template <class Fn>
  NodeId push(Mat<S> value, bool needs_grad, Fn&& back_fn) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    const NodeId id = static_cast<NodeId>(nodes_.size());
    if constexpr (!std::is_same_v<std::decay_t<Fn>, std::nullptr_t>) {
      if (needs_grad) {
        auto fn = std::forward<Fn>(back_fn);
        n.back = [id, fn](Graph& g) { fn(g, g.nodes_[id]); };
      }
    }
    nodes_.push_back(std::move(n));
    return id;
  }
};

}  // namespace spactor

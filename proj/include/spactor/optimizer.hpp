#pragma once

#include <map>
#include <set>
#include <string>

#include "spactor/common.hpp"
#include "spactor/model.hpp"

namespace spactor {

enum class OptimizerKind { Adafactor, Sgd };

OptimizerKind parse_optimizer(const std::string& s);
std::string optimizer_name(OptimizerKind k);

/// Adafactor with factored second moments for matrices, full accumulators
/// for vectors, decay beta2_t = 1 - t^-0.8, update RMS clipping at 1.0 and
/// parameter-scaled step size max(1e-3, RMS(param)) * lr. The SGD kind is a
/// plain step used by finite-difference gradient tests.
template <class S>
class Optimizer {
 public:
  struct Slot {
    bool factored = false;
    Vec<S> row;   // [r] row sums EMA
    Vec<S> col;   // [c] column sums EMA
    Mat<S> full;  // elementwise EMA for non-factored tensors
  };

  explicit Optimizer(OptimizerKind kind = OptimizerKind::Adafactor) : kind_(kind) {}

  OptimizerKind kind() const { return kind_; }

  /// One update over `trainable` names. `t` is the 1-based update count.
  void step(ModelParams<S>& params, const std::map<std::string, Mat<S>>& grads,
            const std::set<std::string>& trainable, double lr, std::uint64_t t) {
    for (const auto& name : trainable) {
      auto git = grads.find(name);
      if (git == grads.end()) continue;
      auto pit = params.tensors.find(name);
      require(pit != params.tensors.end(), "optimizer: unknown parameter " + name);
      if (kind_ == OptimizerKind::Sgd) {
        pit->second -= static_cast<S>(lr) * git->second;
      } else {
        adafactor_update(name, pit->second, git->second, lr, t);
      }
    }
  }

  /// Drop accumulators for parameters frozen at the stage transition.
  void retain_only(const std::set<std::string>& names) {
    for (auto it = slots_.begin(); it != slots_.end();) {
      if (names.count(it->first) == 0)
        it = slots_.erase(it);
      else
        ++it;
    }
  }

  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

 private:
  OptimizerKind kind_;
  std::map<std::string, Slot> slots_;

  static constexpr double kEps1 = 1e-30;  // inside the second-moment estimate
  static constexpr double kEps2 = 1e-3;   // parameter-scale floor
  static constexpr double kClip = 1.0;    // update RMS ceiling
  static constexpr double kDecayExp = 0.8;

  static S rms(const Mat<S>& m) {
    return static_cast<S>(std::sqrt(static_cast<double>(m.squaredNorm()) / m.size()));
  }

  void adafactor_update(const std::string& name, Mat<S>& param, const Mat<S>& grad, double lr,
                        std::uint64_t t) {
    const S beta2 = static_cast<S>(1.0 - std::pow(static_cast<double>(t), -kDecayExp));
    Slot& slot = slots_[name];
    Mat<S> g2 = grad.array().square() + static_cast<S>(kEps1);
    Mat<S> update;
    const bool factored = param.rows() > 1 && param.cols() > 1;
    if (factored) {
      if (slot.row.size() == 0) {
        slot.factored = true;
        slot.row = Vec<S>::Zero(param.rows());
        slot.col = Vec<S>::Zero(param.cols());
      }
      slot.row = beta2 * slot.row + (S(1) - beta2) * g2.rowwise().sum();
      slot.col = beta2 * slot.col + (S(1) - beta2) * g2.colwise().sum().transpose();
      const S row_sum = slot.row.sum();
      // V_ij = row_i * col_j / sum(row); divide grad by sqrt(V)
      Vec<S> inv_sqrt_row = (slot.row / row_sum).array().rsqrt();
      Vec<S> inv_sqrt_col = slot.col.array().rsqrt();
      update = grad.array() *
               (inv_sqrt_row * inv_sqrt_col.transpose()).array();
    } else {
      if (slot.full.size() == 0) {
        slot.factored = false;
        slot.full = Mat<S>::Zero(param.rows(), param.cols());
      }
      slot.full = beta2 * slot.full + (S(1) - beta2) * g2;
      update = grad.array() / slot.full.array().sqrt();
    }
    const S update_rms = rms(update);
    if (update_rms > static_cast<S>(kClip)) update *= static_cast<S>(kClip) / update_rms;
    const S alpha = static_cast<S>(lr) * std::max(static_cast<S>(kEps2), rms(param));
    param -= alpha * update;
  }
};

}  // namespace spactor

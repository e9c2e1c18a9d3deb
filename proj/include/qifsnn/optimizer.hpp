#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qifsnn/layers.hpp"

namespace qifsnn {

enum class OptimizerKind { Sgd, Adam };
enum class SchedulerKind { Cosine, Constant };

const char* to_string(OptimizerKind kind);
const char* to_string(SchedulerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Sgd;
  double momentum = 0.9;      // SGD only
  double weight_decay = 0.0;  // L2 term added to the gradient, skipped for normalisation params
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// SGD:  v <- momentum * v + g;  p <- p - lr * v
// Adam: bias-corrected first/second moments, p <- p - lr * m_hat / (sqrt(v_hat) + eps)
// where g = grad + weight_decay * p for non-normalisation parameters.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(std::span<const ParamRef> params, double lr);
  std::size_t steps_taken() const noexcept { return steps_; }

 private:
  OptimizerConfig cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::size_t steps_ = 0;
};

// Cosine decay from `base` at epoch 0 towards 0 at epoch `epochs`.
double cosine_lr(double base, std::size_t epoch, std::size_t epochs) noexcept;

double scheduled_lr(SchedulerKind kind, double base, std::size_t epoch, std::size_t epochs) noexcept;

// Rescales all gradients so their global L2 norm is at most `max_norm`.
// Returns the norm before clipping.
double clip_grad_norm(std::span<const ParamRef> params, double max_norm);

}  // namespace qifsnn

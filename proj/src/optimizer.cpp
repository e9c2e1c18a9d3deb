#include "qifsnn/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "qifsnn/error.hpp"

namespace qifsnn {

const char* to_string(OptimizerKind kind) { return kind == OptimizerKind::Sgd ? "sgd" : "adam"; }
const char* to_string(SchedulerKind kind) { return kind == SchedulerKind::Cosine ? "cosine" : "constant"; }

void Optimizer::step(std::span<const ParamRef> params, double lr) {
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.value.size(), 0.0);
      second_.emplace_back(cfg_.kind == OptimizerKind::Adam ? p.value.size() : 0, 0.0);
    }
  }
  if (first_.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "optimizer state tracks " + std::to_string(first_.size()) +
                                              " tensors, got " + std::to_string(params.size()));
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));

  for (std::size_t k = 0; k < params.size(); ++k) {
    const ParamRef& p = params[k];
    if (p.grad.size() != p.value.size() || first_[k].size() != p.value.size()) {
      throw Error(ErrorKind::ShapeMismatch, "gradient for " + p.name + " is not congruent");
    }
    const double decay = p.normalization ? 0.0 : cfg_.weight_decay;
    auto& m = first_[k];
    if (cfg_.kind == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i] + decay * p.value[i];
        m[i] = cfg_.momentum * m[i] + g;
        p.value[i] -= lr * m[i];
      }
    } else {
      auto& v = second_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i] + decay * p.value[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
        p.value[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.epsilon);
      }
    }
  }
}

double cosine_lr(double base, std::size_t epoch, std::size_t epochs) noexcept {
  if (epochs == 0) return base;
  const double progress = static_cast<double>(epoch) / static_cast<double>(epochs);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

double scheduled_lr(SchedulerKind kind, double base, std::size_t epoch, std::size_t epochs) noexcept {
  return kind == SchedulerKind::Cosine ? cosine_lr(base, epoch, epochs) : base;
}

double clip_grad_norm(std::span<const ParamRef> params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& p : params)
      for (double& g : p.grad) g *= scale;
  }
  return norm;
}

}  // namespace qifsnn

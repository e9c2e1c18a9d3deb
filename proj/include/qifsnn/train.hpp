#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "qifsnn/checkpoint.hpp"
#include "qifsnn/dataset.hpp"
#include "qifsnn/network.hpp"
#include "qifsnn/optimizer.hpp"

namespace qifsnn {

// Softmax cross-entropy of one output row against a one-hot target.
double cross_entropy(std::span<const double> logits, std::span<const double> target);

struct BatchLoss {
  double loss = 0.0;       // mean over the batch
  Tensor grad;             // dL/dy_hat, (batch, classes)
  std::size_t correct = 0; // argmax hits
};

BatchLoss batch_cross_entropy(const Tensor& logits, std::span<const int> labels);

using GradientSet = std::vector<NamedTensor>;

// Backpropagation through time over the recorded forward pass. Spatial terms
// pass through the surrogate dO/dU; temporal terms through dU(t+1)/dU(t)
// with the reset gate held constant. Gradients are returned, not applied.
GradientSet stbp_backward(Network& net, const ForwardRecord& record, const Tensor& loss_grad);

struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t samples = 300;       // parameters drawn for checking
  std::uint64_t seed = 0;
  double denominator_floor = 1e-6; // relative error is |a - n| / max(|a|, |n|, floor)
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // perturbation moved a spike or crossed a ramp kink
  std::string worst_parameter;
};

// Compares stbp_backward against central differences of the mean batch loss
// on the surrogate-relaxed forward pass. Network state is restored afterwards.
GradCheckReport finite_difference_check(Network& net, const Tensor& inputs, std::span<const int> labels,
                                        const GradCheckOptions& opts = {});

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t timesteps = 2;
  std::uint64_t seed = 0;
  SchedulerKind scheduler = SchedulerKind::Cosine;
  SurrogateConfig surrogate;
  double dropout = 0.0;
  double grad_clip = 0.0;  // 0 disables

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double learning_rate = 0.0;
  double seconds = 0.0;  // wall clock, kept out of the CSV so logs stay reproducible
};

struct TrainLog {
  std::vector<EpochLog> epochs;
  double best_test_accuracy = 0.0;
  std::size_t best_epoch = 0;
};

double evaluate(Network& net, const Dataset& data, std::size_t batch_size = 256);

// Deterministic for a fixed seed: shuffling draws from the "shuffle" substream.
TrainLog train(Network& net, const Dataset& train_set, const Dataset& test_set, const TrainConfig& cfg,
               const std::function<void(const EpochLog&)>& on_epoch = {});

// "epoch,loss,train_acc,test_acc,lr"
std::string training_log_csv(const TrainLog& log);

}  // namespace qifsnn

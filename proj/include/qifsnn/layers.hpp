#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qifsnn/neuron.hpp"
#include "qifsnn/rng.hpp"
#include "qifsnn/surrogate.hpp"
#include "qifsnn/tdbn.hpp"
#include "qifsnn/tensor.hpp"

namespace qifsnn {

// Every layer consumes and produces a sequence tensor whose leading axis
// stacks (timestep, sample) pairs time-major: row t * batch + b. Stateless
// layers treat that axis as a plain batch; spiking layers unroll it in time.

enum class LayerKind { Dense, Conv, AvgPool, Flatten, Tdbn, Spike, Dropout, Residual };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t units = 0;  // dense outputs or conv output channels
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  double eta = 1.0;   // tdBN residual scaling
  double rate = 0.0;  // dropout probability
  std::vector<LayerSpec> body;  // residual branch

  bool operator==(const LayerSpec&) const = default;
};

struct StepContext {
  std::size_t timesteps = 1;
  Mode mode = Mode::Train;
  bool relaxed = false;
  Rng* rng = nullptr;
};

struct SpikeTrace {
  Tensor current;   // I(t)
  Tensor membrane;  // u(t)
  Tensor output;    // o(t), or the surrogate ramp in relaxed mode
  Tensor reset;     // Heaviside spike that gates the reset
};

struct LayerTrace {
  Tensor input;
  std::optional<SpikeTrace> spikes;
  std::optional<TdbnCache> norm;
  Tensor mask;  // dropout
  std::vector<LayerTrace> inner;
};

struct ParamRef {
  std::string name;
  Shape shape;
  std::span<double> value;
  std::span<double> grad;
  bool normalization = false;
};

struct StateRef {
  std::string name;
  Shape shape;
  std::span<double> value;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const noexcept = 0;
  const Shape& input_shape() const noexcept { return input_shape_; }
  const Shape& output_shape() const noexcept { return output_shape_; }

  virtual Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) = 0;
  // Returns dL/dx and accumulates parameter gradients.
  virtual Tensor backward(const Tensor& grad_out, const StepContext& ctx,
                          const LayerTrace& trace) = 0;

  virtual std::vector<ParamRef> parameters(const std::string& prefix);
  // Parameters plus non-learnable persistent buffers.
  virtual std::vector<StateRef> state(const std::string& prefix);
  virtual void zero_grad() {}
  // Visits this layer and nested ones depth-first.
  virtual void visit(const std::function<void(Layer&)>& f) { f(*this); }

 protected:
  Shape input_shape_;
  Shape output_shape_;
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(const Shape& input, std::size_t units, Rng& rng);
  LayerKind kind() const noexcept override { return LayerKind::Dense; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;
  std::vector<ParamRef> parameters(const std::string& prefix) override;
  void zero_grad() override;

  Tensor weight, bias, grad_weight, grad_bias;  // weight: (out, in)
};

class ConvLayer final : public Layer {
 public:
  ConvLayer(const Shape& input, std::size_t out_channels, std::size_t kernel, std::size_t stride,
            std::size_t padding, Rng& rng);
  LayerKind kind() const noexcept override { return LayerKind::Conv; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;
  std::vector<ParamRef> parameters(const std::string& prefix) override;
  void zero_grad() override;

  std::size_t kernel, stride, padding;
  Tensor weight, bias, grad_weight, grad_bias;  // weight: (out, in, k, k)
};

class AvgPoolLayer final : public Layer {
 public:
  AvgPoolLayer(const Shape& input, std::size_t window);
  LayerKind kind() const noexcept override { return LayerKind::AvgPool; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;

  std::size_t window;
};

class FlattenLayer final : public Layer {
 public:
  explicit FlattenLayer(const Shape& input);
  LayerKind kind() const noexcept override { return LayerKind::Flatten; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;
};

class TdbnLayer final : public Layer {
 public:
  TdbnLayer(const Shape& input, double u_th, double eta);
  LayerKind kind() const noexcept override { return LayerKind::Tdbn; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;
  std::vector<ParamRef> parameters(const std::string& prefix) override;
  std::vector<StateRef> state(const std::string& prefix) override;
  void zero_grad() override;

  TdbnParams params;
  std::vector<double> grad_gamma, grad_xi;
};

class SpikeLayer final : public Layer {
 public:
  SpikeLayer(const Shape& input, const NeuronModel& neuron, const SurrogateConfig& surrogate);
  LayerKind kind() const noexcept override { return LayerKind::Spike; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;

  const NeuronModel& neuron() const noexcept { return neuron_; }
  const SpikeSurrogate& surrogate() const noexcept { return surrogate_; }
  void set_surrogate(const SurrogateConfig& cfg) { surrogate_ = SpikeSurrogate(cfg, neuron_); }

 private:
  NeuronModel neuron_;
  SpikeSurrogate surrogate_;
};

class DropoutLayer final : public Layer {
 public:
  DropoutLayer(const Shape& input, double rate);
  LayerKind kind() const noexcept override { return LayerKind::Dropout; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;

  double rate;
};

// y = body(x) + x
class ResidualLayer final : public Layer {
 public:
  ResidualLayer(const Shape& input, std::vector<std::unique_ptr<Layer>> body);
  LayerKind kind() const noexcept override { return LayerKind::Residual; }
  Tensor forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) override;
  Tensor backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) override;
  std::vector<ParamRef> parameters(const std::string& prefix) override;
  std::vector<StateRef> state(const std::string& prefix) override;
  void zero_grad() override;
  void visit(const std::function<void(Layer&)>& f) override;

  std::vector<std::unique_ptr<Layer>> body;
};

// Builds a layer for a per-sample input shape. Spiking layers and tdBN take
// the neuron model (tdBN scales by its threshold).
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input,
                                  const NeuronModel& neuron, const SurrogateConfig& surrogate,
                                  Rng& rng);

// Shape after one layer, without building it.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input);

}  // namespace qifsnn

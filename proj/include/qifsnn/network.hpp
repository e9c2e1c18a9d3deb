#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qifsnn/layers.hpp"

namespace qifsnn {

// Declarative description of a spiking network. The readout is implicit: a
// bias-free dense map W (classes x features) applied to the final layer,
// normally spiking, and averaged over timesteps.
struct NetworkSpec {
  std::string name = "custom";
  Shape input_shape;  // per sample
  std::size_t timesteps = 2;
  std::size_t classes = 2;
  NeuronModel neuron;
  SurrogateConfig surrogate;
  std::vector<LayerSpec> layers;

  bool operator==(const NetworkSpec&) const = default;
};

// Layer list grammar, comma separated:
//   dense:UNITS  conv:OUT:KERNEL[:STRIDE[:PAD]]  pool:K  flatten
//   tdbn[:ETA]  spike  dropout[:P]  res[LAYER, ...]
// A bare `dropout` takes its rate from the training config (see resolve_dropout).
inline constexpr double kInheritDropout = -1.0;
std::vector<LayerSpec> parse_layers(std::string_view text);
void resolve_dropout(std::vector<LayerSpec>& layers, double rate);
std::string format_layers(const std::vector<LayerSpec>& layers);

// Checks shape conformability. Returns the per-sample shape of the final layer.
Shape validate_spec(const NetworkSpec& spec);

// Scaled-down stand-ins used by the desk-scale runs.
NetworkSpec tiny_dense_snn(std::size_t inputs, std::size_t classes, std::size_t hidden = 32);
NetworkSpec tiny_conv_snn(const Shape& image, std::size_t classes);
NetworkSpec tiny_res_snn(const Shape& image, std::size_t classes);

struct ForwardRecord {
  std::size_t timesteps = 0;
  std::size_t batch = 0;
  bool relaxed = false;
  std::vector<LayerTrace> layers;
  Tensor readout_input;  // final spiking output, (T * batch, features)
  Tensor output;         // decoded y_hat, (batch, classes)

  // Spike traces in network order, nested residual branches included.
  std::vector<const SpikeTrace*> spiking_layers() const;
};

// y_hat = (1/T) sum_t W o(t); `spikes` is (T * batch, features).
Tensor decode_output(const Tensor& spikes, const Tensor& readout, std::size_t timesteps);

// Direct encoding: repeats a (batch, ...) tensor over T timesteps.
Tensor replicate_over_time(const Tensor& batch, std::size_t timesteps);

class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed);

  const NetworkSpec& spec() const noexcept { return spec_; }
  std::size_t feature_count() const noexcept { return readout_.dim(1); }

  // `input_seq` is (T * batch, input...) time-major.
  ForwardRecord forward(const Tensor& input_seq, Mode mode);
  // Static input (batch, input...) replicated across the spec's timesteps.
  ForwardRecord forward_static(const Tensor& batch, Mode mode);

  // Accumulates gradients for dL/dy_hat = `grad_output` (batch, classes).
  void backward(const ForwardRecord& record, const Tensor& grad_output);
  void zero_grad();

  std::vector<ParamRef> parameters();
  std::vector<StateRef> state();

  Tensor& readout() noexcept { return readout_; }
  std::vector<Layer*> layers();
  std::vector<SpikeLayer*> spiking_layers();

  // Relaxed mode replaces the spike output with the surrogate ramp while the
  // reset gate keeps using the Heaviside spike. Used for gradient checking.
  void set_relaxed(bool relaxed) noexcept { relaxed_ = relaxed; }
  bool relaxed() const noexcept { return relaxed_; }
  void set_surrogate(const SurrogateConfig& cfg);

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Tensor readout_;
  Tensor grad_readout_;
  Rng dropout_rng_;
  bool relaxed_ = false;
};

// CSV spike raster of one spiking layer: "t,sample,neuron,spike" for every spike.
std::string spike_raster_csv(const ForwardRecord& record, std::size_t spiking_index);

}  // namespace qifsnn

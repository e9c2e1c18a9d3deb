#include "qifsnn/network.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

namespace qifsnn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_count(const std::string& s, const std::string& token) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorKind::ConfigError, "bad integer '" + s + "' in layer '" + token + "'");
  }
  return v;
}

double parse_real(const std::string& s, const std::string& token) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::ConfigError, "bad number '" + s + "' in layer '" + token + "'");
  }
}

// Splits on commas that are not nested inside brackets.
std::vector<std::string> split_top_level(std::string_view text) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : text) {
    if (c == '[') ++depth;
    if (c == ']') --depth;
    if (depth < 0) throw Error(ErrorKind::ConfigError, "unbalanced ']' in layer list");
    if (c == ',' && depth == 0) {
      parts.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) throw Error(ErrorKind::ConfigError, "unbalanced '[' in layer list");
  parts.push_back(trim(cur));
  return parts;
}

LayerSpec parse_token(const std::string& token) {
  if (token.rfind("res[", 0) == 0) {
    if (token.back() != ']') throw Error(ErrorKind::ConfigError, "residual block must end with ']'");
    LayerSpec spec;
    spec.kind = LayerKind::Residual;
    spec.body = parse_layers(std::string_view(token).substr(4, token.size() - 5));
    return spec;
  }
  std::vector<std::string> f;
  std::stringstream ss(token);
  for (std::string part; std::getline(ss, part, ':');) f.push_back(trim(part));
  if (f.empty() || f[0].empty()) throw Error(ErrorKind::ConfigError, "empty layer token");

  const std::string& name = f[0];
  auto want = [&](std::size_t lo, std::size_t hi) {
    if (f.size() - 1 < lo || f.size() - 1 > hi) {
      throw Error(ErrorKind::ConfigError, "layer '" + token + "' has the wrong number of fields");
    }
  };
  LayerSpec spec;
  if (name == "dense") {
    want(1, 1);
    spec.kind = LayerKind::Dense;
    spec.units = parse_count(f[1], token);
  } else if (name == "conv") {
    want(2, 4);
    spec.kind = LayerKind::Conv;
    spec.units = parse_count(f[1], token);
    spec.kernel = parse_count(f[2], token);
    if (f.size() > 3) spec.stride = parse_count(f[3], token);
    if (f.size() > 4) spec.padding = parse_count(f[4], token);
  } else if (name == "pool") {
    want(1, 1);
    spec.kind = LayerKind::AvgPool;
    spec.kernel = parse_count(f[1], token);
  } else if (name == "flatten") {
    want(0, 0);
    spec.kind = LayerKind::Flatten;
  } else if (name == "tdbn") {
    want(0, 1);
    spec.kind = LayerKind::Tdbn;
    if (f.size() > 1) spec.eta = parse_real(f[1], token);
  } else if (name == "spike") {
    want(0, 0);
    spec.kind = LayerKind::Spike;
  } else if (name == "dropout") {
    want(0, 1);
    spec.kind = LayerKind::Dropout;
    spec.rate = f.size() > 1 ? parse_real(f[1], token) : kInheritDropout;
  } else {
    throw Error(ErrorKind::UnsupportedLayer, "unknown layer '" + name + "'");
  }
  return spec;
}

std::string format_token(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Dense: return "dense:" + std::to_string(l.units);
    case LayerKind::Conv:
      return "conv:" + std::to_string(l.units) + ":" + std::to_string(l.kernel) + ":" +
             std::to_string(l.stride) + ":" + std::to_string(l.padding);
    case LayerKind::AvgPool: return "pool:" + std::to_string(l.kernel);
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Tdbn: return l.eta == 1.0 ? "tdbn" : "tdbn:" + format_double(l.eta);
    case LayerKind::Spike: return "spike";
    case LayerKind::Dropout: return l.rate < 0.0 ? "dropout" : "dropout:" + format_double(l.rate);
    case LayerKind::Residual: return "res[" + format_layers(l.body) + "]";
  }
  return "?";
}

void collect_spikes(const std::vector<LayerTrace>& traces, std::vector<const SpikeTrace*>& out) {
  for (const auto& t : traces) {
    if (t.spikes) out.push_back(&*t.spikes);
    collect_spikes(t.inner, out);
  }
}

}  // namespace

std::vector<LayerSpec> parse_layers(std::string_view text) {
  std::vector<LayerSpec> out;
  if (trim(text).empty()) return out;
  for (const auto& token : split_top_level(text)) out.push_back(parse_token(token));
  return out;
}

void resolve_dropout(std::vector<LayerSpec>& layers, double rate) {
  for (auto& l : layers) {
    if (l.kind == LayerKind::Dropout && l.rate < 0.0) l.rate = rate;
    resolve_dropout(l.body, rate);
  }
}

std::string format_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += ", ";
    out += format_token(layers[i]);
  }
  return out;
}

Shape validate_spec(const NetworkSpec& spec) {
  if (spec.input_shape.empty() || element_count(spec.input_shape) == 0) {
    throw Error(ErrorKind::ConfigError, "network input shape is empty");
  }
  if (spec.timesteps == 0) throw Error(ErrorKind::InvalidParams, "timesteps must be >= 1");
  if (spec.classes < 2) throw Error(ErrorKind::ConfigError, "need at least two classes");
  if (spec.layers.empty()) throw Error(ErrorKind::ConfigError, "the layer list is empty");
  Shape s = spec.input_shape;
  for (const auto& l : spec.layers) s = infer_output_shape(l, s);
  return s;
}

NetworkSpec tiny_dense_snn(std::size_t inputs, std::size_t classes, std::size_t hidden) {
  NetworkSpec spec;
  spec.name = "TinyDenseSNN";
  spec.input_shape = {inputs};
  spec.classes = classes;
  const auto h = std::to_string(hidden);
  spec.layers = parse_layers("dense:" + h + ", tdbn, spike, dense:" + h + ", tdbn, spike");
  return spec;
}

NetworkSpec tiny_conv_snn(const Shape& image, std::size_t classes) {
  NetworkSpec spec;
  spec.name = "TinyConvSNN";
  spec.input_shape = image;
  spec.classes = classes;
  spec.layers = parse_layers(
      "conv:8:3:1:1, tdbn, spike, conv:16:3:1:1, tdbn, spike, pool:2, flatten, dense:64, tdbn, spike");
  return spec;
}

NetworkSpec tiny_res_snn(const Shape& image, std::size_t classes) {
  NetworkSpec spec;
  spec.name = "TinyResSNN";
  spec.input_shape = image;
  spec.classes = classes;
  // Pre-addition tdBN uses eta = 1/sqrt(2) so the summed branches keep variance u_th^2.
  spec.layers = parse_layers(
      "conv:8:3:1:1, tdbn, spike, "
      "res[conv:8:3:1:1, tdbn, spike, conv:8:3:1:1, tdbn:0.70710678118654757], spike, "
      "res[conv:8:3:1:1, tdbn, spike, conv:8:3:1:1, tdbn:0.70710678118654757], spike, "
      "pool:2, flatten, dense:32, tdbn, spike");
  return spec;
}

std::vector<const SpikeTrace*> ForwardRecord::spiking_layers() const {
  std::vector<const SpikeTrace*> out;
  collect_spikes(layers, out);
  return out;
}

Tensor decode_output(const Tensor& spikes, const Tensor& readout, std::size_t timesteps) {
  if (spikes.rank() != 2 || readout.rank() != 2 || readout.dim(1) != spikes.dim(1)) {
    throw Error(ErrorKind::ShapeMismatch, "readout " + shape_string(readout.shape()) +
                                              " cannot decode spikes " + shape_string(spikes.shape()));
  }
  if (timesteps == 0 || spikes.dim(0) % timesteps != 0) {
    throw Error(ErrorKind::ShapeMismatch, "spike rows do not split into timesteps");
  }
  const std::size_t batch = spikes.dim(0) / timesteps;
  const std::size_t classes = readout.dim(0), features = readout.dim(1);
  Tensor y({batch, classes});
  for (std::size_t t = 0; t < timesteps; ++t) {
    for (std::size_t b = 0; b < batch; ++b) {
      const double* o = spikes.data() + (t * batch + b) * features;
      for (std::size_t k = 0; k < classes; ++k) {
        const double* w = readout.data() + k * features;
        double acc = 0.0;
        for (std::size_t j = 0; j < features; ++j) acc += w[j] * o[j];
        y[b * classes + k] += acc;
      }
    }
  }
  for (auto& v : y.values()) v /= static_cast<double>(timesteps);
  return y;
}

Tensor replicate_over_time(const Tensor& batch, std::size_t timesteps) {
  if (batch.rank() < 1) throw Error(ErrorKind::ShapeMismatch, "cannot replicate a scalar");
  Shape shape = batch.shape();
  shape[0] *= timesteps;
  std::vector<double> data;
  data.reserve(batch.size() * timesteps);
  for (std::size_t t = 0; t < timesteps; ++t) data.insert(data.end(), batch.values().begin(), batch.values().end());
  return Tensor(std::move(shape), std::move(data));
}

Network::Network(NetworkSpec spec, std::uint64_t seed)
    : spec_(std::move(spec)), dropout_rng_(make_rng(seed, "dropout")) {
  const Shape final_shape = validate_spec(spec_);
  if (spec_.neuron.kind == NeuronKind::Lif) spec_.neuron.lif.validate();
  auto rng = make_rng(seed, "init");
  Shape shape = spec_.input_shape;
  for (const auto& l : spec_.layers) {
    layers_.push_back(make_layer(l, shape, spec_.neuron, spec_.surrogate, rng));
    shape = layers_.back()->output_shape();
  }
  const std::size_t features = element_count(final_shape);
  readout_ = Tensor({spec_.classes, features});
  const double bound = 1.0 / std::sqrt(static_cast<double>(features));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : readout_.values()) v = dist(rng);
  grad_readout_ = Tensor(readout_.shape());
}

ForwardRecord Network::forward(const Tensor& input_seq, Mode mode) {
  const std::size_t T = spec_.timesteps;
  if (input_seq.rank() != spec_.input_shape.size() + 1 || input_seq.dim(0) % T != 0) {
    throw Error(ErrorKind::ShapeMismatch, "network input " + shape_string(input_seq.shape()) +
                                              " is not (T*batch, " +
                                              shape_string(spec_.input_shape).substr(1));
  }
  ForwardRecord rec;
  rec.timesteps = T;
  rec.batch = input_seq.dim(0) / T;
  rec.relaxed = relaxed_;
  rec.layers.resize(layers_.size());
  const StepContext ctx{T, mode, relaxed_, &dropout_rng_};

  Tensor h = input_seq;
  for (std::size_t i = 0; i < layers_.size(); ++i) h = layers_[i]->forward(h, ctx, rec.layers[i]);
  h.reshape({h.dim(0), h.size() / h.dim(0)});
  rec.output = decode_output(h, readout_, T);
  rec.readout_input = std::move(h);
  return rec;
}

ForwardRecord Network::forward_static(const Tensor& batch, Mode mode) {
  return forward(replicate_over_time(batch, spec_.timesteps), mode);
}

void Network::backward(const ForwardRecord& record, const Tensor& grad_output) {
  if (record.layers.size() != layers_.size() || record.readout_input.empty() ||
      record.timesteps != spec_.timesteps) {
    throw Error(ErrorKind::IncompleteRecord, "forward record does not match this network");
  }
  const std::size_t T = record.timesteps, B = record.batch;
  const std::size_t classes = spec_.classes, features = readout_.dim(1);
  require_shape(grad_output, {B, classes}, "output gradient");

  // y_hat = (1/T) sum_t W o(t)
  const Tensor& o = record.readout_input;
  Tensor grad_o(o.shape());
  const double inv_t = 1.0 / static_cast<double>(T);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) {
      const double* orow = o.data() + (t * B + b) * features;
      double* grow = grad_o.data() + (t * B + b) * features;
      for (std::size_t k = 0; k < classes; ++k) {
        const double g = grad_output[b * classes + k] * inv_t;
        if (g == 0.0) continue;
        const double* w = readout_.data() + k * features;
        double* gw = grad_readout_.data() + k * features;
        for (std::size_t j = 0; j < features; ++j) {
          gw[j] += g * orow[j];
          grow[j] += g * w[j];
        }
      }
    }
  }

  const StepContext ctx{T, Mode::Train, record.relaxed, nullptr};
  Shape last = layers_.back()->output_shape();
  last.insert(last.begin(), o.dim(0));
  Tensor g = grad_o.reshaped(last);
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g, ctx, record.layers[i]);
}

void Network::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
  grad_readout_.fill(0.0);
}

std::vector<ParamRef> Network::parameters() {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto p = layers_[i]->parameters("layer" + std::to_string(i) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back({"readout.weight", readout_.shape(), readout_.values(), grad_readout_.values(), false});
  return out;
}

std::vector<StateRef> Network::state() {
  std::vector<StateRef> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    auto p = layers_[i]->state("layer" + std::to_string(i) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back({"readout.weight", readout_.shape(), readout_.values()});
  return out;
}

std::vector<Layer*> Network::layers() {
  std::vector<Layer*> out;
  for (auto& l : layers_) l->visit([&](Layer& x) { out.push_back(&x); });
  return out;
}

std::vector<SpikeLayer*> Network::spiking_layers() {
  std::vector<SpikeLayer*> out;
  for (Layer* l : layers()) {
    if (l->kind() == LayerKind::Spike) out.push_back(static_cast<SpikeLayer*>(l));
  }
  return out;
}

void Network::set_surrogate(const SurrogateConfig& cfg) {
  spec_.surrogate = cfg;
  for (SpikeLayer* s : spiking_layers()) s->set_surrogate(cfg);
}

std::string spike_raster_csv(const ForwardRecord& record, std::size_t spiking_index) {
  const auto traces = record.spiking_layers();
  if (spiking_index >= traces.size()) {
    throw Error(ErrorKind::IndexOutOfRange, "no spiking layer " + std::to_string(spiking_index));
  }
  const Tensor& o = traces[spiking_index]->reset;
  const std::size_t T = record.timesteps, B = record.batch;
  const std::size_t per_sample = o.size() / (T * B);
  CsvWriter csv({"t", "sample", "neuron", "spike"});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < per_sample; ++j)
        if (o[(t * B + b) * per_sample + j] != 0.0) csv.row(t, b, j, 1);
  return csv.str();
}

}  // namespace qifsnn

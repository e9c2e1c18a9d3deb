#include "qifsnn/layers.hpp"

#include <cmath>
#include <sstream>

#include "qifsnn/error.hpp"

namespace qifsnn {

namespace {

void init_uniform(Tensor& t, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : t.values()) v = dist(rng);
}

std::size_t rows_of(const Tensor& x, const Shape& sample, const char* who) {
  const std::size_t per = element_count(sample);
  if (x.rank() != sample.size() + 1 || per == 0 || x.size() != x.dim(0) * per) {
    throw Error(ErrorKind::ShapeMismatch, std::string(who) + " expects (N," +
                                              shape_string(sample).substr(1) + " input, got " +
                                              shape_string(x.shape()));
  }
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (x.dim(i + 1) != sample[i]) {
      throw Error(ErrorKind::ShapeMismatch, std::string(who) + " expects sample shape " +
                                                shape_string(sample) + ", got " +
                                                shape_string(x.shape()));
    }
  }
  return x.dim(0);
}

Shape with_rows(std::size_t rows, const Shape& sample) {
  Shape s{rows};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (in + 2 * p < k || s == 0) {
    throw Error(ErrorKind::ShapeMismatch, "convolution window larger than padded input");
  }
  return (in + 2 * p - k) / s + 1;
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv: return "conv";
    case LayerKind::AvgPool: return "pool";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Tdbn: return "tdbn";
    case LayerKind::Spike: return "spike";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Residual: return "res";
  }
  return "?";
}

std::vector<ParamRef> Layer::parameters(const std::string&) { return {}; }

std::vector<StateRef> Layer::state(const std::string& prefix) {
  std::vector<StateRef> out;
  for (auto& p : parameters(prefix)) out.push_back({p.name, p.shape, p.value});
  return out;
}

// ---------------------------------------------------------------- dense

DenseLayer::DenseLayer(const Shape& input, std::size_t units, Rng& rng) {
  if (input.size() != 1) {
    throw Error(ErrorKind::ShapeMismatch,
                "dense layer needs a flat input, got " + shape_string(input) + " (add flatten)");
  }
  if (units == 0) throw Error(ErrorKind::InvalidParams, "dense layer needs at least one unit");
  input_shape_ = input;
  output_shape_ = {units};
  weight = Tensor({units, input[0]});
  bias = Tensor({units});
  const double bound = 1.0 / std::sqrt(static_cast<double>(input[0]));
  init_uniform(weight, bound, rng);
  init_uniform(bias, bound, rng);
  grad_weight = Tensor(weight.shape());
  grad_bias = Tensor(bias.shape());
}

Tensor DenseLayer::forward(const Tensor& x, const StepContext&, LayerTrace& trace) {
  const std::size_t rows = rows_of(x, input_shape_, "dense");
  const std::size_t in = input_shape_[0], out = output_shape_[0];
  Tensor y({rows, out});
  for (std::size_t n = 0; n < rows; ++n) {
    const double* xr = x.data() + n * in;
    double* yr = y.data() + n * out;
    for (std::size_t o = 0; o < out; ++o) {
      const double* w = weight.data() + o * in;
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * xr[i];
      yr[o] = acc;
    }
  }
  trace.input = x;
  return y;
}

Tensor DenseLayer::backward(const Tensor& grad_out, const StepContext&, const LayerTrace& trace) {
  const std::size_t rows = rows_of(grad_out, output_shape_, "dense backward");
  const std::size_t in = input_shape_[0], out = output_shape_[0];
  const Tensor& x = trace.input;
  Tensor dx({rows, in});
  for (std::size_t n = 0; n < rows; ++n) {
    const double* g = grad_out.data() + n * out;
    const double* xr = x.data() + n * in;
    double* dxr = dx.data() + n * in;
    for (std::size_t o = 0; o < out; ++o) {
      if (g[o] == 0.0) continue;
      grad_bias[o] += g[o];
      const double* w = weight.data() + o * in;
      double* gw = grad_weight.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) {
        gw[i] += g[o] * xr[i];
        dxr[i] += g[o] * w[i];
      }
    }
  }
  return dx;
}

std::vector<ParamRef> DenseLayer::parameters(const std::string& prefix) {
  return {{prefix + "weight", weight.shape(), weight.values(), grad_weight.values(), false},
          {prefix + "bias", bias.shape(), bias.values(), grad_bias.values(), false}};
}

void DenseLayer::zero_grad() {
  grad_weight.fill(0.0);
  grad_bias.fill(0.0);
}

// ---------------------------------------------------------------- conv

ConvLayer::ConvLayer(const Shape& input, std::size_t out_channels, std::size_t kernel_,
                     std::size_t stride_, std::size_t padding_, Rng& rng)
    : kernel(kernel_), stride(stride_), padding(padding_) {
  if (input.size() != 3) {
    throw Error(ErrorKind::ShapeMismatch, "conv layer needs (C,H,W) input, got " + shape_string(input));
  }
  if (out_channels == 0 || kernel == 0) {
    throw Error(ErrorKind::InvalidParams, "conv layer needs positive channels and kernel");
  }
  input_shape_ = input;
  output_shape_ = {out_channels, conv_extent(input[1], kernel, stride, padding),
                   conv_extent(input[2], kernel, stride, padding)};
  weight = Tensor({out_channels, input[0], kernel, kernel});
  bias = Tensor({out_channels});
  const double bound = 1.0 / std::sqrt(static_cast<double>(input[0] * kernel * kernel));
  init_uniform(weight, bound, rng);
  init_uniform(bias, bound, rng);
  grad_weight = Tensor(weight.shape());
  grad_bias = Tensor(bias.shape());
}

Tensor ConvLayer::forward(const Tensor& x, const StepContext&, LayerTrace& trace) {
  const std::size_t rows = rows_of(x, input_shape_, "conv");
  const std::size_t C = input_shape_[0], H = input_shape_[1], W = input_shape_[2];
  const std::size_t K = output_shape_[0], Ho = output_shape_[1], Wo = output_shape_[2];
  Tensor y(with_rows(rows, output_shape_));
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = bias[k];
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t p = 0; p < kernel; ++p) {
              const long iy = static_cast<long>(oy * stride + p) - static_cast<long>(padding);
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t q = 0; q < kernel; ++q) {
                const long ix = static_cast<long>(ox * stride + q) - static_cast<long>(padding);
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                acc += weight[((k * C + c) * kernel + p) * kernel + q] *
                       x[((n * C + c) * H + iy) * W + ix];
              }
            }
          }
          y[((n * K + k) * Ho + oy) * Wo + ox] = acc;
        }
      }
    }
  }
  trace.input = x;
  return y;
}

Tensor ConvLayer::backward(const Tensor& grad_out, const StepContext&, const LayerTrace& trace) {
  const std::size_t rows = rows_of(grad_out, output_shape_, "conv backward");
  const std::size_t C = input_shape_[0], H = input_shape_[1], W = input_shape_[2];
  const std::size_t K = output_shape_[0], Ho = output_shape_[1], Wo = output_shape_[2];
  const Tensor& x = trace.input;
  Tensor dx(x.shape());
  for (std::size_t n = 0; n < rows; ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t oy = 0; oy < Ho; ++oy) {
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          const double g = grad_out[((n * K + k) * Ho + oy) * Wo + ox];
          if (g == 0.0) continue;
          grad_bias[k] += g;
          for (std::size_t c = 0; c < C; ++c) {
            for (std::size_t p = 0; p < kernel; ++p) {
              const long iy = static_cast<long>(oy * stride + p) - static_cast<long>(padding);
              if (iy < 0 || iy >= static_cast<long>(H)) continue;
              for (std::size_t q = 0; q < kernel; ++q) {
                const long ix = static_cast<long>(ox * stride + q) - static_cast<long>(padding);
                if (ix < 0 || ix >= static_cast<long>(W)) continue;
                const std::size_t wi = ((k * C + c) * kernel + p) * kernel + q;
                const std::size_t xi = ((n * C + c) * H + iy) * W + ix;
                grad_weight[wi] += g * x[xi];
                dx[xi] += g * weight[wi];
              }
            }
          }
        }
      }
    }
  }
  return dx;
}

std::vector<ParamRef> ConvLayer::parameters(const std::string& prefix) {
  return {{prefix + "weight", weight.shape(), weight.values(), grad_weight.values(), false},
          {prefix + "bias", bias.shape(), bias.values(), grad_bias.values(), false}};
}

void ConvLayer::zero_grad() {
  grad_weight.fill(0.0);
  grad_bias.fill(0.0);
}

// ---------------------------------------------------------------- pool

AvgPoolLayer::AvgPoolLayer(const Shape& input, std::size_t window_) : window(window_) {
  if (input.size() != 3 || window == 0 || input[1] < window || input[2] < window) {
    throw Error(ErrorKind::ShapeMismatch,
                "average pool window " + std::to_string(window) + " does not fit " + shape_string(input));
  }
  input_shape_ = input;
  output_shape_ = {input[0], input[1] / window, input[2] / window};
}

Tensor AvgPoolLayer::forward(const Tensor& x, const StepContext&, LayerTrace&) {
  const std::size_t rows = rows_of(x, input_shape_, "pool");
  const std::size_t C = input_shape_[0], H = input_shape_[1], W = input_shape_[2];
  const std::size_t Ho = output_shape_[1], Wo = output_shape_[2];
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor y(with_rows(rows, output_shape_));
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          double acc = 0.0;
          for (std::size_t p = 0; p < window; ++p)
            for (std::size_t q = 0; q < window; ++q)
              acc += x[((n * C + c) * H + oy * window + p) * W + ox * window + q];
          y[((n * C + c) * Ho + oy) * Wo + ox] = acc * inv;
        }
  return y;
}

Tensor AvgPoolLayer::backward(const Tensor& grad_out, const StepContext&, const LayerTrace&) {
  const std::size_t rows = rows_of(grad_out, output_shape_, "pool backward");
  const std::size_t C = input_shape_[0], H = input_shape_[1], W = input_shape_[2];
  const std::size_t Ho = output_shape_[1], Wo = output_shape_[2];
  const double inv = 1.0 / static_cast<double>(window * window);
  Tensor dx(with_rows(rows, input_shape_));
  for (std::size_t n = 0; n < rows; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t oy = 0; oy < Ho; ++oy)
        for (std::size_t ox = 0; ox < Wo; ++ox) {
          const double g = grad_out[((n * C + c) * Ho + oy) * Wo + ox] * inv;
          for (std::size_t p = 0; p < window; ++p)
            for (std::size_t q = 0; q < window; ++q)
              dx[((n * C + c) * H + oy * window + p) * W + ox * window + q] += g;
        }
  return dx;
}

// ---------------------------------------------------------------- flatten

FlattenLayer::FlattenLayer(const Shape& input) {
  input_shape_ = input;
  output_shape_ = {element_count(input)};
}

Tensor FlattenLayer::forward(const Tensor& x, const StepContext&, LayerTrace&) {
  const std::size_t rows = rows_of(x, input_shape_, "flatten");
  return x.reshaped(with_rows(rows, output_shape_));
}

Tensor FlattenLayer::backward(const Tensor& grad_out, const StepContext&, const LayerTrace&) {
  const std::size_t rows = rows_of(grad_out, output_shape_, "flatten backward");
  return grad_out.reshaped(with_rows(rows, input_shape_));
}

// ---------------------------------------------------------------- tdBN

TdbnLayer::TdbnLayer(const Shape& input, double u_th, double eta) {
  if (input.empty()) throw Error(ErrorKind::ShapeMismatch, "tdBN needs a channel axis");
  input_shape_ = input;
  output_shape_ = input;
  params = TdbnParams::make(input[0], u_th, eta);
  grad_gamma.assign(input[0], 0.0);
  grad_xi.assign(input[0], 0.0);
}

Tensor TdbnLayer::forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) {
  rows_of(x, input_shape_, "tdbn");
  TdbnCache cache;
  Tensor y = tdbn_forward(x, params, ctx.mode, &cache);
  trace.norm = std::move(cache);
  return y;
}

Tensor TdbnLayer::backward(const Tensor& grad_out, const StepContext&, const LayerTrace& trace) {
  if (!trace.norm) throw Error(ErrorKind::IncompleteRecord, "tdBN trace missing");
  return tdbn_backward(grad_out, params, *trace.norm, grad_gamma, grad_xi);
}

std::vector<ParamRef> TdbnLayer::parameters(const std::string& prefix) {
  const Shape s{params.channels()};
  return {{prefix + "gamma", s, params.gamma, grad_gamma, true},
          {prefix + "xi", s, params.xi, grad_xi, true}};
}

std::vector<StateRef> TdbnLayer::state(const std::string& prefix) {
  auto out = Layer::state(prefix);
  const Shape s{params.channels()};
  out.push_back({prefix + "running_mean", s, params.running_mean});
  out.push_back({prefix + "running_var", s, params.running_var});
  return out;
}

void TdbnLayer::zero_grad() {
  std::fill(grad_gamma.begin(), grad_gamma.end(), 0.0);
  std::fill(grad_xi.begin(), grad_xi.end(), 0.0);
}

// ---------------------------------------------------------------- spiking

SpikeLayer::SpikeLayer(const Shape& input, const NeuronModel& neuron, const SurrogateConfig& surrogate)
    : neuron_(neuron), surrogate_(surrogate, neuron) {
  if (neuron.kind == NeuronKind::Lif) neuron.lif.validate();
  input_shape_ = input;
  output_shape_ = input;
}

Tensor SpikeLayer::forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) {
  const std::size_t rows = rows_of(x, input_shape_, "spike");
  const std::size_t T = ctx.timesteps;
  if (T == 0 || rows % T != 0) {
    throw Error(ErrorKind::ShapeMismatch, std::to_string(rows) + " rows do not split into " +
                                              std::to_string(T) + " timesteps");
  }
  const std::size_t per_step = x.size() / T;
  const double threshold = neuron_.threshold();

  SpikeTrace st{x, Tensor(x.shape()), Tensor(x.shape()), Tensor(x.shape())};
  std::vector<double> u_prev(per_step, neuron_.initial_membrane());
  std::vector<double> o_prev(per_step, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t j = 0; j < per_step; ++j) {
      const std::size_t idx = t * per_step + j;
      const double u = neuron_.recurrence(u_prev[j], o_prev[j]) + x[idx];
      if (!std::isfinite(u)) {
        throw Error(ErrorKind::NonFiniteValue, "membrane potential is not finite at step " +
                                                   std::to_string(t));
      }
      const double spike = heaviside(u - threshold);
      st.membrane[idx] = u;
      st.reset[idx] = spike;
      st.output[idx] = ctx.relaxed ? surrogate_.ramp(u) : spike;
      u_prev[j] = u;
      o_prev[j] = spike;
    }
  }
  Tensor out = st.output;
  trace.spikes = std::move(st);
  return out;
}

Tensor SpikeLayer::backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) {
  if (!trace.spikes) throw Error(ErrorKind::IncompleteRecord, "spiking trace missing");
  const SpikeTrace& st = *trace.spikes;
  require_shape(grad_out, st.membrane.shape(), "spike backward");
  const std::size_t T = ctx.timesteps;
  const std::size_t per_step = grad_out.size() / T;

  Tensor grad_current(grad_out.shape());
  std::vector<double> grad_next(per_step, 0.0);  // dL/du(t+1)
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t j = 0; j < per_step; ++j) {
      const std::size_t idx = t * per_step + j;
      const double u = st.membrane[idx];
      double g = grad_out[idx] * surrogate_.derivative(u);
      if (t + 1 < T) g += grad_next[j] * neuron_.recurrence_derivative(u, st.reset[idx]);
      grad_current[idx] = g;
      grad_next[j] = g;
    }
  }
  return grad_current;
}

// ---------------------------------------------------------------- dropout

DropoutLayer::DropoutLayer(const Shape& input, double rate_) : rate(rate_) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error(ErrorKind::InvalidParams, "dropout rate must be in [0, 1)");
  input_shape_ = input;
  output_shape_ = input;
}

Tensor DropoutLayer::forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) {
  if (ctx.mode == Mode::Eval || rate == 0.0) return x;
  if (!ctx.rng) throw Error(ErrorKind::InvalidParams, "dropout in training needs a random stream");
  std::bernoulli_distribution keep(1.0 - rate);
  Tensor mask(x.shape());
  Tensor y(x.shape());
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask[i] = keep(*ctx.rng) ? scale : 0.0;
    y[i] = x[i] * mask[i];
  }
  trace.mask = std::move(mask);
  return y;
}

Tensor DropoutLayer::backward(const Tensor& grad_out, const StepContext&, const LayerTrace& trace) {
  if (trace.mask.empty()) return grad_out;
  Tensor dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * trace.mask[i];
  return dx;
}

// ---------------------------------------------------------------- residual

ResidualLayer::ResidualLayer(const Shape& input, std::vector<std::unique_ptr<Layer>> body_)
    : body(std::move(body_)) {
  input_shape_ = input;
  output_shape_ = body.empty() ? input : body.back()->output_shape();
  if (output_shape_ != input_shape_) {
    throw Error(ErrorKind::ShapeMismatch, "residual branch maps " + shape_string(input) + " to " +
                                              shape_string(output_shape_));
  }
}

Tensor ResidualLayer::forward(const Tensor& x, const StepContext& ctx, LayerTrace& trace) {
  trace.inner.assign(body.size(), LayerTrace{});
  Tensor h = x;
  for (std::size_t i = 0; i < body.size(); ++i) h = body[i]->forward(h, ctx, trace.inner[i]);
  accumulate(h, x);
  return h;
}

Tensor ResidualLayer::backward(const Tensor& grad_out, const StepContext& ctx, const LayerTrace& trace) {
  if (trace.inner.size() != body.size()) {
    throw Error(ErrorKind::IncompleteRecord, "residual trace does not cover its branch");
  }
  Tensor g = grad_out;
  for (std::size_t i = body.size(); i-- > 0;) g = body[i]->backward(g, ctx, trace.inner[i]);
  accumulate(g, grad_out);
  return g;
}

std::vector<ParamRef> ResidualLayer::parameters(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    auto p = body[i]->parameters(prefix + std::to_string(i) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<StateRef> ResidualLayer::state(const std::string& prefix) {
  std::vector<StateRef> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    auto p = body[i]->state(prefix + std::to_string(i) + ".");
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

void ResidualLayer::zero_grad() {
  for (auto& l : body) l->zero_grad();
}

void ResidualLayer::visit(const std::function<void(Layer&)>& f) {
  f(*this);
  for (auto& l : body) l->visit(f);
}

// ---------------------------------------------------------------- factory

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input,
                                  const NeuronModel& neuron, const SurrogateConfig& surrogate,
                                  Rng& rng) {
  switch (spec.kind) {
    case LayerKind::Dense: return std::make_unique<DenseLayer>(input, spec.units, rng);
    case LayerKind::Conv:
      return std::make_unique<ConvLayer>(input, spec.units, spec.kernel, spec.stride, spec.padding, rng);
    case LayerKind::AvgPool: return std::make_unique<AvgPoolLayer>(input, spec.kernel);
    case LayerKind::Flatten: return std::make_unique<FlattenLayer>(input);
    case LayerKind::Tdbn: return std::make_unique<TdbnLayer>(input, neuron.threshold(), spec.eta);
    case LayerKind::Spike: return std::make_unique<SpikeLayer>(input, neuron, surrogate);
    case LayerKind::Dropout: return std::make_unique<DropoutLayer>(input, spec.rate);
    case LayerKind::Residual: {
      std::vector<std::unique_ptr<Layer>> body;
      Shape shape = input;
      for (const auto& inner : spec.body) {
        body.push_back(make_layer(inner, shape, neuron, surrogate, rng));
        shape = body.back()->output_shape();
      }
      return std::make_unique<ResidualLayer>(input, std::move(body));
    }
  }
  throw Error(ErrorKind::UnsupportedLayer, "unknown layer kind");
}

Shape infer_output_shape(const LayerSpec& spec, const Shape& input) {
  switch (spec.kind) {
    case LayerKind::Dense:
      if (input.size() != 1) throw Error(ErrorKind::ShapeMismatch, "dense layer needs a flat input");
      return {spec.units};
    case LayerKind::Conv:
      if (input.size() != 3) throw Error(ErrorKind::ShapeMismatch, "conv layer needs (C,H,W) input");
      return {spec.units, conv_extent(input[1], spec.kernel, spec.stride, spec.padding),
              conv_extent(input[2], spec.kernel, spec.stride, spec.padding)};
    case LayerKind::AvgPool:
      if (input.size() != 3 || spec.kernel == 0) {
        throw Error(ErrorKind::ShapeMismatch, "pool layer needs (C,H,W) input");
      }
      return {input[0], input[1] / spec.kernel, input[2] / spec.kernel};
    case LayerKind::Flatten: return {element_count(input)};
    case LayerKind::Residual: {
      Shape s = input;
      for (const auto& inner : spec.body) s = infer_output_shape(inner, s);
      return s;
    }
    default: return input;
  }
}

}  // namespace qifsnn

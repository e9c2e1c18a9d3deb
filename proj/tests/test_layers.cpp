#include <doctest.h>

#include <cmath>
#include <random>

#include "qifsnn/error.hpp"
#include "qifsnn/layers.hpp"

using namespace qifsnn;

namespace {

Tensor run(Layer& l, const Tensor& x, std::size_t T = 1, Mode mode = Mode::Eval) {
  LayerTrace trace;
  Rng rng(0);
  return l.forward(x, StepContext{T, mode, false, &rng}, trace);
}

}  // namespace

TEST_CASE("dense identity") {
  Rng rng(1);
  DenseLayer d({3}, 3, rng);
  d.weight.fill(0.0);
  for (int i = 0; i < 3; ++i) d.weight[i * 3 + i] = 1.0;
  d.bias.fill(0.0);
  const Tensor x({2, 3}, std::vector<double>{1, 2, 3, -4, 5, 0.5});
  CHECK(run(d, x) == x);
  CHECK_THROWS_AS(run(d, Tensor({2, 4})), Error);
}

TEST_CASE("conv examples") {
  Rng rng(1);
  ConvLayer doubler({1, 4, 4}, 1, 1, 1, 0, rng);
  doubler.weight.fill(2.0);
  doubler.bias.fill(0.0);
  Tensor x({1, 1, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.5 * i - 3.0;
  const Tensor y = run(doubler, x);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == 2.0 * x[i]);

  ConvLayer sum({1, 3, 3}, 1, 3, 1, 0, rng);
  sum.weight.fill(1.0);
  sum.bias.fill(0.0);
  const Tensor s = run(sum, Tensor({1, 1, 3, 3}, 1.0));
  CHECK(s.shape() == Shape{1, 1, 1, 1});
  CHECK(s[0] == 9.0);

  ConvLayer padded({1, 3, 3}, 1, 3, 1, 1, rng);
  padded.weight.fill(1.0);
  padded.bias.fill(0.0);
  const Tensor p = run(padded, Tensor({1, 1, 3, 3}, 1.0));
  CHECK(p.shape() == Shape{1, 1, 3, 3});
  CHECK(p[0] == 4.0);
  CHECK(p[4] == 9.0);

  ConvLayer strided({1, 5, 5}, 1, 3, 2, 0, rng);
  CHECK(strided.output_shape() == Shape{1, 2, 2});
}

TEST_CASE("pool and flatten") {
  AvgPoolLayer pool({1, 2, 2}, 2);
  const Tensor y = run(pool, Tensor({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 6}));
  CHECK(y.size() == 1);
  CHECK(y[0] == 3.0);
  FlattenLayer flat({2, 3, 3});
  CHECK(flat.output_shape() == Shape{18});
}

TEST_CASE("layer gradients match finite differences") {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Rng rng(2);
  std::vector<std::unique_ptr<Layer>> layers;
  layers.push_back(std::make_unique<DenseLayer>(Shape{5}, 4, rng));
  layers.push_back(std::make_unique<ConvLayer>(Shape{2, 5, 5}, 3, 3, 2, 1, rng));
  layers.push_back(std::make_unique<AvgPoolLayer>(Shape{2, 4, 4}, 2));
  for (auto& layer : layers) {
    Shape in = layer->input_shape();
    in.insert(in.begin(), 3);
    Tensor x(in);
    for (auto& v : x.values()) v = n(gen);
    LayerTrace trace;
    const StepContext ctx{1, Mode::Train, false, nullptr};
    const Tensor y = layer->forward(x, ctx, trace);
    Tensor w(y.shape());
    for (auto& v : w.values()) v = n(gen);
    layer->zero_grad();
    const Tensor dx = layer->backward(w, ctx, trace);
    auto loss = [&](const Tensor& in_x) {
      LayerTrace t;
      const Tensor out = layer->forward(in_x, ctx, t);
      double s = 0;
      for (std::size_t i = 0; i < out.size(); ++i) s += w[i] * out[i];
      return s;
    };
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); ++i) {
      Tensor up = x, down = x;
      up[i] += h;
      down[i] -= h;
      CHECK(dx[i] == doctest::Approx((loss(up) - loss(down)) / (2 * h)).epsilon(1e-6));
    }
    for (auto& p : layer->parameters("")) {
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double keep = p.value[i];
        p.value[i] = keep + h;
        const double up = loss(x);
        p.value[i] = keep - h;
        const double down = loss(x);
        p.value[i] = keep;
        CHECK(p.grad[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("spike layer: constant suprathreshold drive") {
  NeuronModel qif;
  SpikeLayer s({1}, qif, {SurrogateKind::AnalyticalWindow, 1.0});
  const std::size_t T = 6;
  LayerTrace trace;
  const Tensor out = s.forward(Tensor({T, 1}, 0.6), StepContext{T, Mode::Eval, false, nullptr}, trace);
  // u(1) = f(0) + 0.6 = 0.6 spikes; the reset then gives u = 0 + 0.6 again every step.
  for (std::size_t t = 0; t < T; ++t) {
    CHECK(out[t] == 1.0);
    CHECK(trace.spikes->membrane[t] == doctest::Approx(0.6));
  }
}

TEST_CASE("spike layer: hand-traced QIF sequence") {
  NeuronModel qif;
  SpikeLayer s({1}, qif, {SurrogateKind::AnalyticalWindow, 1.0});
  LayerTrace trace;
  const Tensor out =
      s.forward(Tensor({3, 1}, std::vector<double>{0.3, 0.3, 0.3}), StepContext{3, Mode::Eval, false, nullptr}, trace);
  // u1 = 0.3; u2 = 0.25 * 0.3 * (-0.2) + 0.3 = 0.285; u3 = 0.25 * 0.285 * (-0.215) + 0.3
  CHECK(trace.spikes->membrane[0] == doctest::Approx(0.3));
  CHECK(trace.spikes->membrane[1] == doctest::Approx(0.285));
  CHECK(trace.spikes->membrane[2] == doctest::Approx(0.25 * 0.285 * -0.215 + 0.3));
  for (double o : out.values()) CHECK(o == 0.0);
}

TEST_CASE("spike layer rejects non-finite membranes") {
  NeuronModel qif;
  SpikeLayer s({1}, qif, {SurrogateKind::AnalyticalWindow, 1.0});
  LayerTrace trace;
  try {
    s.forward(Tensor({2, 1}, std::vector<double>{std::nan(""), 0.0}), StepContext{2, Mode::Eval, false, nullptr}, trace);
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFiniteValue);
  }
}

TEST_CASE("dropout is inverted and train-only") {
  DropoutLayer d({1000}, 0.25);
  const Tensor x({1, 1000}, 1.0);
  CHECK(run(d, x, 1, Mode::Eval) == x);
  const Tensor y = run(d, x, 1, Mode::Train);
  std::size_t kept = 0;
  for (double v : y.values()) {
    CHECK((v == 0.0 || v == doctest::Approx(1.0 / 0.75)));
    kept += v != 0.0;
  }
  CHECK(kept > 650);
  CHECK(kept < 850);
  CHECK_THROWS_AS(DropoutLayer({4}, 1.0), Error);
}

TEST_CASE("output shape inference") {
  LayerSpec conv{LayerKind::Conv, 8, 3, 1, 1, 1.0, 0.0, {}};
  CHECK(infer_output_shape(conv, {1, 8, 8}) == Shape{8, 8, 8});
  LayerSpec dense{LayerKind::Dense, 10, 1, 1, 0, 1.0, 0.0, {}};
  CHECK(infer_output_shape(dense, {100}) == Shape{10});
  CHECK_THROWS_AS(infer_output_shape(conv, {8}), Error);
}

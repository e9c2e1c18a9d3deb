#include <doctest.h>

#include <cmath>
#include <random>

#include "qifsnn/error.hpp"
#include "qifsnn/network.hpp"

using namespace qifsnn;

namespace {

NetworkSpec small_spec(NeuronKind kind = NeuronKind::Qif, std::size_t T = 3) {
  NetworkSpec s;
  s.input_shape = {6};
  s.timesteps = T;
  s.classes = 3;
  s.neuron.kind = kind;
  s.surrogate.kind = kind == NeuronKind::Qif ? SurrogateKind::AnalyticalWindow : SurrogateKind::Rectangle;
  s.layers = parse_layers("dense:8, tdbn, spike, dense:5, tdbn, spike");
  return s;
}

Tensor random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x({rows, cols});
  for (auto& v : x.values()) v = n(rng);
  return x;
}

}  // namespace

TEST_CASE("layer grammar round trip") {
  const std::string text = "conv:8:3:1:1, tdbn, spike, res[conv:8:3:1:1, tdbn:0.5, spike], pool:2, flatten, "
                           "dropout:0.25, dropout, dense:10, spike";
  const auto layers = parse_layers(text);
  CHECK(layers.size() == 10);
  CHECK(layers[3].kind == LayerKind::Residual);
  CHECK(layers[3].body.size() == 3);
  CHECK(layers[3].body[1].eta == 0.5);
  CHECK(layers[7].rate == kInheritDropout);
  CHECK(parse_layers(format_layers(layers)) == layers);
  auto resolved = layers;
  resolve_dropout(resolved, 0.6);
  CHECK(resolved[6].rate == 0.25);
  CHECK(resolved[7].rate == 0.6);
}

TEST_CASE("layer grammar errors") {
  CHECK_THROWS_AS(parse_layers("dense"), Error);
  CHECK_THROWS_AS(parse_layers("dense:x"), Error);
  CHECK_THROWS_AS(parse_layers("res[dense:3"), Error);
  try {
    parse_layers("lstm:4");
    FAIL("expected UnsupportedLayer");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnsupportedLayer);
  }
}

TEST_CASE("spec validation") {
  NetworkSpec s = small_spec();
  CHECK(validate_spec(s) == Shape{5});
  s.layers = parse_layers("conv:3:3");
  CHECK_THROWS_AS(validate_spec(s), Error);
  s = small_spec();
  s.classes = 1;
  CHECK_THROWS_AS(validate_spec(s), Error);
  CHECK(validate_spec(tiny_conv_snn({1, 8, 8}, 10)) == Shape{64});
  CHECK(validate_spec(tiny_res_snn({1, 8, 8}, 10)) == Shape{32});
}

TEST_CASE("zero input gives no spikes and zero output") {
  NetworkSpec s;
  s.input_shape = {4};
  s.timesteps = 1;
  s.classes = 2;
  s.layers = parse_layers("dense:3, spike");
  Network net(s, 1);
  for (auto& p : net.parameters())
    if (p.name == "layer0.bias") std::fill(p.value.begin(), p.value.end(), 0.0);
  const auto rec = net.forward_static(Tensor({2, 4}), Mode::Eval);
  for (double o : rec.readout_input.values()) CHECK(o == 0.0);
  for (double y : rec.output.values()) CHECK(y == 0.0);
}

TEST_CASE("decode examples") {
  const Tensor w({2, 2}, std::vector<double>{1, 0, 0, 1});
  const Tensor o({2, 2}, std::vector<double>{1, 0, 1, 1});
  const Tensor y = decode_output(o, w, 2);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 0.5);
  const Tensor w2({1, 2}, std::vector<double>{2, 3});
  CHECK(decode_output(Tensor({1, 2}, std::vector<double>{1, 1}), w2, 1)[0] == 5.0);
  CHECK(decode_output(Tensor({4, 2}), w2, 2)[0] == 0.0);
  CHECK_THROWS_AS(decode_output(o, Tensor({2, 3}), 2), Error);
}

TEST_CASE("spikes are binary at every layer") {
  Network net(small_spec(), 4);
  const auto rec = net.forward_static(random_batch(10, 6, 1), Mode::Train);
  const auto traces = rec.spiking_layers();
  REQUIRE(traces.size() == 2);
  for (const auto* t : traces) {
    CHECK(t->output.dim(0) == 3 * 10);
    for (double o : t->output.values()) CHECK((o == 0.0 || o == 1.0));
  }
}

TEST_CASE("temporal causality") {
  Network net(small_spec(NeuronKind::Qif, 4), 5);
  // populate running statistics
  net.forward_static(random_batch(32, 6, 2), Mode::Train);
  const std::size_t B = 3;
  const Tensor base = replicate_over_time(random_batch(B, 6, 3), 4);
  Tensor changed = base;
  for (std::size_t i = 2 * B * 6; i < changed.size(); ++i) changed[i] += 5.0;  // t >= 2
  const auto a = net.forward(base, Mode::Eval);
  const auto b = net.forward(changed, Mode::Eval);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto* ta = a.spiking_layers()[k];
    const auto* tb = b.spiking_layers()[k];
    const std::size_t per_t = ta->membrane.size() / 4;
    for (std::size_t i = 0; i < 2 * per_t; ++i) CHECK(ta->membrane[i] == tb->membrane[i]);
    bool later_differs = false;
    for (std::size_t i = 2 * per_t; i < ta->membrane.size(); ++i) later_differs |= ta->membrane[i] != tb->membrane[i];
    CHECK(later_differs);
  }
}

TEST_CASE("LIF and QIF differ only at spiking layers") {
  Network q(small_spec(NeuronKind::Qif), 9);
  NetworkSpec ls = small_spec(NeuronKind::Lif);
  Network l(ls, 9);
  const Tensor x = random_batch(4, 6, 4);
  const auto rq = q.forward_static(x, Mode::Train);
  const auto rl = l.forward_static(x, Mode::Train);
  // identical initialisation, so the first synaptic and tdBN outputs match
  CHECK(rq.layers[1].input == rl.layers[1].input);
  CHECK(rq.layers[2].input == rl.layers[2].input);
  CHECK_FALSE(rq.layers[2].spikes->membrane == rl.layers[2].spikes->membrane);
}

TEST_CASE("surrogate choice does not change the forward pass") {
  NetworkSpec a = small_spec();
  NetworkSpec b = small_spec();
  b.surrogate = {SurrogateKind::Rectangle, 0.7};
  Network na(a, 2), nb(b, 2);
  const Tensor x = random_batch(5, 6, 8);
  CHECK(na.forward_static(x, Mode::Train).output == nb.forward_static(x, Mode::Train).output);
}

TEST_CASE("initialisation is seeded") {
  Network a(small_spec(), 1), b(small_spec(), 1), c(small_spec(), 2);
  const Tensor x = random_batch(3, 6, 1);
  CHECK(a.forward_static(x, Mode::Train).output == b.forward_static(x, Mode::Train).output);
  CHECK_FALSE(a.forward_static(x, Mode::Train).output == c.forward_static(x, Mode::Train).output);
}

TEST_CASE("conv and residual networks run") {
  for (const NetworkSpec& base : {tiny_conv_snn({1, 8, 8}, 3), tiny_res_snn({1, 8, 8}, 3)}) {
    NetworkSpec s = base;
    s.timesteps = 2;
    Network net(s, 3);
    Tensor x({2, 1, 8, 8});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(0.37 * i);
    const auto rec = net.forward_static(x, Mode::Train);
    CHECK(rec.output.shape() == Shape{2, 3});
    net.zero_grad();
    net.backward(rec, Tensor({2, 3}, 0.1));
    CHECK(rec.output.all_finite());
  }
}

TEST_CASE("spike raster csv") {
  NetworkSpec s;
  s.input_shape = {1};
  s.timesteps = 2;
  s.classes = 2;
  s.layers = parse_layers("dense:1, spike");
  Network net(s, 0);
  for (auto& p : net.parameters()) {
    if (p.name == "layer0.weight") p.value[0] = 1.0;
    if (p.name == "layer0.bias") p.value[0] = 0.0;
  }
  const auto rec = net.forward_static(Tensor({2, 1}, std::vector<double>{0.6, 0.1}), Mode::Eval);
  CHECK(spike_raster_csv(rec, 0) == "t,sample,neuron,spike\n0,0,0,1\n1,0,0,1\n");
  CHECK_THROWS_AS(spike_raster_csv(rec, 1), Error);
}

TEST_CASE("forward input validation") {
  Network net(small_spec(), 1);
  CHECK_THROWS_AS(net.forward(Tensor({4, 6}), Mode::Eval), Error);  // 4 rows, T = 3
  CHECK_THROWS_AS(net.forward_static(Tensor({2, 5}), Mode::Eval), Error);
}

#include <doctest.h>

#include <functional>

#include "qifsnn/config.hpp"
#include "qifsnn/error.hpp"

using namespace qifsnn;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("defaults round trip") {
  const RunConfig d;
  const RunConfig back = parse_config(serialize_config(d));
  CHECK(back == d);
  CHECK(parse_config("") == d);
}

TEST_CASE("non-default values round trip") {
  const RunConfig c = parse_config(R"(
[run]
seed = 42
threads = 3

[training]
optimizer = adam
learning_rate = 0.003
epochs = 7
timesteps = 4
surrogate = rectangle
rectangle_alpha = 0.5
dropout = 0.2

[neuron]
kind = qif
a = 0.3
u_r = -0.1
u_c = 3.0
u_th = 0.6

[network]
name = custom
layers = dense:16, tdbn, spike, dropout, dense:8, tdbn, spike

[energy]
e_mac = 3.1e-12

[analyze]
initial_conditions = 0.1, 0.2
grid_points = 5

[verify]
samples = 20000
se_multiple = 3
)");
  CHECK(c.seed == 42);
  CHECK(c.training.seed == 42);
  CHECK(c.threads == 3);
  CHECK(c.training.optimizer == OptimizerKind::Adam);
  CHECK(c.training.surrogate.kind == SurrogateKind::Rectangle);
  CHECK(c.qif_form == QifForm::FixedPoints);
  CHECK(c.neuron.qif.u_r() == -0.1);
  CHECK(c.neuron.qif.u_c() == 3.0);
  CHECK(c.energy.e_mac == 3.1e-12);
  CHECK(c.analyze.initial_conditions == std::vector<double>{0.1, 0.2});
  const RunConfig back = parse_config(serialize_config(c));
  CHECK(back == c);
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("config errors") {
  CHECK(kind_of([] { parse_config("[training]\nlearnig_rate = 1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config("[trainer]\nepochs = 1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config("epochs = 1\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config("[training]\nepochs = many\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config("[training]\noptimizer = rmsprop\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config("[neuron]\nu1 = 0\nu_r = 0\n"); }) == ErrorKind::ConfigError);
  CHECK(kind_of([] { parse_config("[neuron]\na = 1\nu_r = 2\nu_c = 3\n"); }) == ErrorKind::NegativeDiscriminant);
  CHECK(kind_of([] { parse_config("[neuron]\na = -1\n"); }) == ErrorKind::InvalidParams);
}

TEST_CASE("network resolution") {
  RunConfig c;
  c.training.timesteps = 3;
  const NetworkSpec flat = resolve_network(c, {4, 4}, 5);
  CHECK(flat.layers.front().kind == LayerKind::Flatten);
  CHECK(flat.timesteps == 3);
  CHECK(flat.classes == 5);

  c.network = "custom";
  c.layers = "dense:8, dropout, spike";
  c.training.dropout = 0.3;
  const NetworkSpec s = resolve_network(c, {6}, 2);
  CHECK(s.layers[1].rate == 0.3);

  c.neuron.kind = NeuronKind::Lif;
  c.training.surrogate.kind = SurrogateKind::Rectangle;
  CHECK(resolve_network(c, {6}, 2).neuron.kind == NeuronKind::Lif);

  c.network = "mystery";
  CHECK(kind_of([&] { resolve_network(c, {6}, 2); }) == ErrorKind::ConfigError);
}

#include "qifsnn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <functional>
#include <map>
#include <optional>
#include <sstream>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

namespace qifsnn {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
  throw Error(ErrorKind::ConfigError, "invalid value '" + value + "' for " + key);
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size()) bad_value(key, v);
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) bad_value(key, v);
    out.push_back(to_real(key, item.substr(b, e - b + 1)));
  }
  return out;
}

template <typename Enum>
Enum to_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, Enum>> names) {
  for (const auto& [name, value] : names) {
    if (v == name) return value;
  }
  bad_value(key, v);
}

using Setter = std::function<void(const std::string&)>;
using Section = std::map<std::string, Setter>;

struct NeuronKeys {
  double a = 0.25;
  std::optional<double> u1, u2, u_r, u_c;
  double u_th = 0.5;
  double u_reset = 0.0;
  double beta = 0.5;
};

std::map<std::string, Section> schema(RunConfig& c, NeuronKeys& n) {
  std::map<std::string, Section> s;
  auto real = [](double& dst, const char* key) { return [&dst, key](const std::string& v) { dst = to_real(key, v); }; };
  auto count = [](std::size_t& dst, const char* key) {
    return [&dst, key](const std::string& v) { dst = static_cast<std::size_t>(to_uint(key, v)); };
  };
  auto text = [](std::string& dst) { return [&dst](const std::string& v) { dst = v; }; };
  auto opt = [](std::optional<double>& dst, const char* key) {
    return [&dst, key](const std::string& v) { dst = to_real(key, v); };
  };

  s["run"] = {
      {"seed", [&c](const std::string& v) { c.seed = to_uint("seed", v); }},
      {"threads", [&c](const std::string& v) { c.threads = static_cast<unsigned>(to_uint("threads", v)); }},
  };
  TrainConfig& t = c.training;
  s["training"] = {
      {"optimizer",
       [&t](const std::string& v) {
         t.optimizer = to_enum<OptimizerKind>("optimizer", v, {{"sgd", OptimizerKind::Sgd}, {"adam", OptimizerKind::Adam}});
       }},
      {"learning_rate", real(t.learning_rate, "learning_rate")},
      {"weight_decay", real(t.weight_decay, "weight_decay")},
      {"momentum", real(t.momentum, "momentum")},
      {"epochs", count(t.epochs, "epochs")},
      {"batch_size", count(t.batch_size, "batch_size")},
      {"timesteps", count(t.timesteps, "timesteps")},
      {"dropout", real(t.dropout, "dropout")},
      {"scheduler",
       [&t](const std::string& v) {
         t.scheduler = to_enum<SchedulerKind>("scheduler", v,
                                              {{"cosine", SchedulerKind::Cosine}, {"constant", SchedulerKind::Constant}});
       }},
      {"surrogate",
       [&t](const std::string& v) {
         t.surrogate.kind = to_enum<SurrogateKind>(
             "surrogate", v, {{"window", SurrogateKind::AnalyticalWindow}, {"rectangle", SurrogateKind::Rectangle}});
       }},
      {"rectangle_alpha", real(t.surrogate.alpha, "rectangle_alpha")},
      {"grad_clip", real(t.grad_clip, "grad_clip")},
  };
  s["neuron"] = {
      {"kind",
       [&c](const std::string& v) {
         c.neuron.kind = to_enum<NeuronKind>("kind", v, {{"qif", NeuronKind::Qif}, {"lif", NeuronKind::Lif}});
       }},
      {"a", real(n.a, "a")},
      {"u1", opt(n.u1, "u1")},
      {"u2", opt(n.u2, "u2")},
      {"u_r", opt(n.u_r, "u_r")},
      {"u_c", opt(n.u_c, "u_c")},
      {"u_th", real(n.u_th, "u_th")},
      {"u_reset", real(n.u_reset, "u_reset")},
      {"beta", real(n.beta, "beta")},
  };
  s["network"] = {
      {"name", text(c.network)},
      {"layers", text(c.layers)},
      {"hidden", count(c.hidden, "hidden")},
      {"classes", count(c.classes, "classes")},
  };
  DataConfig& d = c.data;
  s["data"] = {
      {"source", text(d.source)},
      {"classes", count(d.blobs.classes, "classes")},
      {"per_class", count(d.blobs.per_class, "per_class")},
      {"dim", count(d.blobs.dim, "dim")},
      {"separation", real(d.blobs.separation, "separation")},
      {"test_fraction", real(d.blobs.test_fraction, "test_fraction")},
      {"train_images", text(d.train_images)},
      {"train_labels", text(d.train_labels)},
      {"test_images", text(d.test_images)},
      {"test_labels", text(d.test_labels)},
  };
  s["energy"] = {
      {"e_mac", real(c.energy.e_mac, "e_mac")},
      {"e_ac", real(c.energy.e_ac, "e_ac")},
      {"checkpoint", text(c.checkpoint)},
  };
  AnalyzeConfig& an = c.analyze;
  s["analyze"] = {
      {"initial_conditions", [&an](const std::string& v) { an.initial_conditions = to_list("initial_conditions", v); }},
      {"grid_min", real(an.grid_min, "grid_min")},
      {"grid_max", real(an.grid_max, "grid_max")},
      {"grid_points", count(an.grid_points, "grid_points")},
      {"max_steps", count(an.trajectory.max_steps, "max_steps")},
      {"conv_tol", real(an.trajectory.conv_tol, "conv_tol")},
      {"div_bound", real(an.trajectory.div_bound, "div_bound")},
  };
  s["verify"] = {
      {"samples", count(c.verify.samples, "samples")},
      {"se_multiple", real(c.verify.se_multiple, "se_multiple")},
  };
  return s;
}

NeuronModel build_neuron(NeuronKind kind, const NeuronKeys& n, QifForm& form) {
  const bool roots = n.u1 || n.u2;
  const bool fixed = n.u_r || n.u_c;
  if (roots && fixed) throw Error(ErrorKind::ConfigError, "give either u1/u2 or u_r/u_c, not both");
  NeuronModel m;
  m.kind = kind;
  if (fixed) {
    if (!n.u_r || !n.u_c) throw Error(ErrorKind::ConfigError, "u_r and u_c must be given together");
    form = QifForm::FixedPoints;
    m.qif = QifParams::from_fixed_points(n.a, *n.u_r, *n.u_c, n.u_th, n.u_reset);
  } else {
    form = QifForm::Roots;
    m.qif = QifParams::from_roots(n.a, n.u1.value_or(0.0), n.u2.value_or(0.5), n.u_th, n.u_reset);
  }
  m.lif = LifParams{n.beta, n.u_th, n.u_reset};
  return m;
}

}  // namespace

std::vector<double> AnalyzeConfig::grid() const {
  if (grid_points == 1) return {grid_min};
  std::vector<double> g(grid_points);
  for (std::size_t i = 0; i < grid_points; ++i) {
    g[i] = grid_min + (grid_max - grid_min) * static_cast<double>(i) / static_cast<double>(grid_points - 1);
  }
  return g;
}

void RunConfig::validate() const {
  training.validate();
  if (training.seed != seed) throw Error(ErrorKind::ConfigError, "training seed differs from run seed");
  if (neuron.kind == NeuronKind::Lif) neuron.lif.validate();
  if (neuron.kind != NeuronKind::Qif && training.surrogate.kind == SurrogateKind::AnalyticalWindow) {
    throw Error(ErrorKind::ConfigError, "the analytical window needs QIF neurons; use surrogate = rectangle");
  }
  if (!(training.surrogate.alpha > 0.0)) throw Error(ErrorKind::ConfigError, "rectangle_alpha must be positive");
  if (network != "tiny_dense" && network != "tiny_conv" && network != "tiny_res" && network != "custom") {
    throw Error(ErrorKind::ConfigError, "unknown network '" + network + "'");
  }
  if (network == "custom" && layers.empty()) throw Error(ErrorKind::ConfigError, "custom network needs layers");
  if (network != "custom" && !layers.empty()) throw Error(ErrorKind::ConfigError, "layers only apply to network = custom");
  if (!layers.empty()) parse_layers(layers);
  if (hidden == 0) throw Error(ErrorKind::ConfigError, "hidden must be positive");
  if (data.source != "blobs" && data.source != "idx") throw Error(ErrorKind::ConfigError, "data source must be blobs or idx");
  if (data.source == "idx" && (data.train_images.empty() || data.train_labels.empty() ||
                               data.test_images.empty() || data.test_labels.empty())) {
    throw Error(ErrorKind::ConfigError, "idx data needs train/test image and label paths");
  }
  energy.validate();
  if (analyze.grid_points == 0 || !(analyze.grid_max >= analyze.grid_min)) {
    throw Error(ErrorKind::ConfigError, "analyze grid needs grid_points >= 1 and grid_max >= grid_min");
  }
  if (analyze.trajectory.max_steps == 0 || !(analyze.trajectory.conv_tol > 0.0)) {
    throw Error(ErrorKind::ConfigError, "analyze needs max_steps >= 1 and conv_tol > 0");
  }
  if (verify.samples < 10000) throw Error(ErrorKind::ConfigError, "verify samples must be at least 10000");
  if (!(verify.se_multiple >= 0.0)) throw Error(ErrorKind::ConfigError, "se_multiple must be >= 0");
  if (threads == 0) throw Error(ErrorKind::ConfigError, "threads must be positive");
}

RunConfig parse_config(std::string_view text) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("config syntax: ") + e.what());
  }
  RunConfig cfg;
  NeuronKeys n;
  auto sections = schema(cfg, n);
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw Error(ErrorKind::ConfigError, "key '" + section + "' outside a section");
    auto s = sections.find(section);
    if (s == sections.end()) throw Error(ErrorKind::ConfigError, "unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      auto setter = s->second.find(key);
      if (setter == s->second.end()) {
        throw Error(ErrorKind::ConfigError, "unknown key '" + key + "' in [" + section + "]");
      }
      setter->second(value.data());
    }
  }
  cfg.neuron = build_neuron(cfg.neuron.kind, n, cfg.qif_form);
  cfg.training.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  RunConfig cfg = parse_config(read_file(path));
  // idx paths are relative to the config file
  const auto base = path.parent_path();
  for (std::string* p : {&cfg.data.train_images, &cfg.data.train_labels, &cfg.data.test_images, &cfg.data.test_labels}) {
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).string();
  }
  return cfg;
}

std::string serialize_config(const RunConfig& c) {
  std::ostringstream o;
  auto kv = [&o](const char* key, const std::string& v) { o << key << " = " << v << '\n'; };
  auto num = [&](const char* key, double v) { kv(key, format_double(v)); };
  auto cnt = [&](const char* key, std::uint64_t v) { kv(key, std::to_string(v)); };

  o << "[run]\n";
  cnt("seed", c.seed);
  cnt("threads", c.threads);

  const TrainConfig& t = c.training;
  o << "\n[training]\n";
  kv("optimizer", to_string(t.optimizer));
  num("learning_rate", t.learning_rate);
  num("weight_decay", t.weight_decay);
  num("momentum", t.momentum);
  cnt("epochs", t.epochs);
  cnt("batch_size", t.batch_size);
  cnt("timesteps", t.timesteps);
  num("dropout", t.dropout);
  kv("scheduler", to_string(t.scheduler));
  kv("surrogate", to_string(t.surrogate.kind));
  num("rectangle_alpha", t.surrogate.alpha);
  num("grad_clip", t.grad_clip);

  const QifParams& q = c.neuron.qif;
  o << "\n[neuron]\n";
  kv("kind", to_string(c.neuron.kind));
  num("a", q.a());
  if (c.qif_form == QifForm::FixedPoints) {
    num("u_r", q.u_r());
    num("u_c", q.u_c());
  } else {
    num("u1", q.u1());
    num("u2", q.u2());
  }
  num("u_th", q.u_th());
  num("u_reset", q.u_reset());
  num("beta", c.neuron.lif.beta);

  o << "\n[network]\n";
  kv("name", c.network);
  if (!c.layers.empty()) kv("layers", c.layers);
  cnt("hidden", c.hidden);
  cnt("classes", c.classes);

  const DataConfig& d = c.data;
  o << "\n[data]\n";
  kv("source", d.source);
  cnt("classes", d.blobs.classes);
  cnt("per_class", d.blobs.per_class);
  cnt("dim", d.blobs.dim);
  num("separation", d.blobs.separation);
  num("test_fraction", d.blobs.test_fraction);
  if (!d.train_images.empty()) kv("train_images", d.train_images);
  if (!d.train_labels.empty()) kv("train_labels", d.train_labels);
  if (!d.test_images.empty()) kv("test_images", d.test_images);
  if (!d.test_labels.empty()) kv("test_labels", d.test_labels);

  o << "\n[energy]\n";
  num("e_mac", c.energy.e_mac);
  num("e_ac", c.energy.e_ac);
  if (!c.checkpoint.empty()) kv("checkpoint", c.checkpoint);

  const AnalyzeConfig& a = c.analyze;
  o << "\n[analyze]\n";
  std::string ics;
  for (std::size_t i = 0; i < a.initial_conditions.size(); ++i) {
    ics += (i ? ", " : "") + format_double(a.initial_conditions[i]);
  }
  kv("initial_conditions", ics);
  num("grid_min", a.grid_min);
  num("grid_max", a.grid_max);
  cnt("grid_points", a.grid_points);
  cnt("max_steps", a.trajectory.max_steps);
  num("conv_tol", a.trajectory.conv_tol);
  num("div_bound", a.trajectory.div_bound);

  o << "\n[verify]\n";
  cnt("samples", c.verify.samples);
  num("se_multiple", c.verify.se_multiple);
  return o.str();
}

NetworkSpec resolve_network(const RunConfig& cfg, const Shape& input_shape, std::size_t classes) {
  cfg.validate();
  const std::size_t k = cfg.classes ? cfg.classes : classes;
  NetworkSpec spec;
  if (cfg.network == "tiny_dense") {
    spec = tiny_dense_snn(element_count(input_shape), k, cfg.hidden);
    if (input_shape.size() > 1) {
      spec.input_shape = input_shape;
      LayerSpec flat;
      flat.kind = LayerKind::Flatten;
      spec.layers.insert(spec.layers.begin(), flat);
    }
  } else if (cfg.network == "tiny_conv") {
    spec = tiny_conv_snn(input_shape, k);
  } else if (cfg.network == "tiny_res") {
    spec = tiny_res_snn(input_shape, k);
  } else {
    spec.name = "custom";
    spec.input_shape = input_shape;
    spec.classes = k;
    spec.layers = parse_layers(cfg.layers);
  }
  spec.timesteps = cfg.training.timesteps;
  spec.neuron = cfg.neuron;
  spec.surrogate = cfg.training.surrogate;
  resolve_dropout(spec.layers, cfg.training.dropout);
  validate_spec(spec);
  return spec;
}

DatasetHandle load_dataset(const RunConfig& cfg) {
  if (cfg.data.source == "blobs") return generate_blobs(cfg.data.blobs, cfg.seed);
  return load_idx_dataset(cfg.data.train_images, cfg.data.train_labels, cfg.data.test_images, cfg.data.test_labels);
}

}  // namespace qifsnn

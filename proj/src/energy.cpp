#include "qifsnn/energy.hpp"

#include <cmath>
#include <optional>
#include <json.hpp>

#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

namespace qifsnn {

namespace {

struct Walker {
  const NetworkSpec& spec;
  const std::vector<double>& rates;
  const EnergyConstants& k;
  std::size_t timesteps;
  std::vector<EnergyRow> rows;
  std::size_t next_spike = 0;

  double take_rate() {
    const double fr = next_spike < rates.size() ? rates[next_spike] : 0.0;
    ++next_spike;
    return fr;
  }

  // `drive` is the firing rate of the spikes feeding the current layer, or
  // nullopt while activations are still real-valued.
  Shape walk(const std::vector<LayerSpec>& layers, Shape shape, std::optional<double>& drive,
             const std::string& prefix) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const LayerSpec& l = layers[i];
      const std::string name = prefix + std::to_string(i);
      const Shape out = infer_output_shape(l, shape);
      EnergyRow row;
      row.name = name;
      row.kind = l.kind;
      if (l.kind == LayerKind::Residual) {
        std::optional<double> inner = drive;
        walk(l.body, shape, inner, name + ".");
        row.counts = count_ops(l, shape, false, spec.neuron.kind);
        row.firing_rate = 1.0;
        drive = inner;
      } else if (l.kind == LayerKind::Spike) {
        row.counts = count_ops(l, shape, false, spec.neuron.kind);
        row.firing_rate = take_rate();
        drive = row.firing_rate;
      } else {
        row.counts = count_ops(l, shape, !drive.has_value(), spec.neuron.kind);
        row.firing_rate = drive.value_or(1.0);
        if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv) drive.reset();
      }
      row.joules = layer_energy(timesteps, row.firing_rate, row.counts, k);
      rows.push_back(row);
      shape = out;
    }
    return shape;
  }
};

}  // namespace

void EnergyConstants::validate() const {
  if (!(e_mac > 0.0 && std::isfinite(e_mac)) || !(e_ac > 0.0 && std::isfinite(e_ac))) {
    throw Error(ErrorKind::InvalidParams, "energy constants must be positive");
  }
}

double layer_energy(std::size_t timesteps, double fr, const LayerOpCounts& counts, const EnergyConstants& k) {
  if (!(fr >= 0.0 && fr <= 1.0)) throw Error(ErrorKind::InvalidRate, "firing rate " + format_double(fr) + " outside [0, 1]");
  if (timesteps == 0) throw Error(ErrorKind::InvalidParams, "timesteps must be >= 1");
  if (counts.op_ac < 0.0 || counts.op_mac < 0.0) throw Error(ErrorKind::InvalidParams, "negative op count");
  k.validate();
  return static_cast<double>(timesteps) * (fr * k.e_ac * counts.op_ac + k.e_mac * counts.op_mac);
}

LayerOpCounts count_ops(const LayerSpec& layer, const Shape& input, bool real_input, NeuronKind neuron) {
  const Shape out = infer_output_shape(layer, input);
  LayerOpCounts c;
  double synaptic = 0.0;
  switch (layer.kind) {
    case LayerKind::Dense:
      synaptic = static_cast<double>(element_count(input)) * static_cast<double>(layer.units);
      break;
    case LayerKind::Conv:
      // output positions x kernel volume x input channels, per output channel
      synaptic = static_cast<double>(element_count(out)) *
                 static_cast<double>(layer.kernel * layer.kernel * input.at(0));
      break;
    case LayerKind::AvgPool:
      synaptic = static_cast<double>(element_count(input));
      break;
    case LayerKind::Residual:
      c.op_ac = static_cast<double>(element_count(out));
      return c;
    case LayerKind::Spike:
      c.neuron_count = element_count(input);
      c.op_mac = static_cast<double>(c.neuron_count) * (neuron == NeuronKind::Qif ? 2.0 : 1.0);
      return c;
    case LayerKind::Flatten:
    case LayerKind::Tdbn:
    case LayerKind::Dropout:
      return c;
    default:
      throw Error(ErrorKind::UnsupportedLayer, "no op-count model for this layer");
  }
  (real_input ? c.op_mac : c.op_ac) = synaptic;
  return c;
}

double firing_rate(const ForwardRecord& record, std::size_t spiking_index) {
  const auto traces = record.spiking_layers();
  if (spiking_index >= traces.size()) {
    throw Error(ErrorKind::IndexOutOfRange, "no spiking layer " + std::to_string(spiking_index));
  }
  const Tensor& o = traces[spiking_index]->reset;
  if (o.empty()) return 0.0;
  double sum = 0.0;
  for (double v : o.values()) sum += v;
  return sum / static_cast<double>(o.size());
}

std::vector<double> measure_firing_rates(Network& net, const Tensor& inputs, std::size_t batch_size) {
  const std::size_t n = inputs.rank() ? inputs.dim(0) : 0;
  std::vector<double> sums;
  std::vector<double> counts;
  for (std::size_t first = 0; first < n; first += batch_size) {
    const auto rec = net.forward_static(slice_rows(inputs, first, std::min(batch_size, n - first)), Mode::Eval);
    const auto traces = rec.spiking_layers();
    sums.resize(traces.size(), 0.0);
    counts.resize(traces.size(), 0.0);
    for (std::size_t i = 0; i < traces.size(); ++i) {
      for (double v : traces[i]->reset.values()) sums[i] += v;
      counts[i] += static_cast<double>(traces[i]->reset.size());
    }
  }
  for (std::size_t i = 0; i < sums.size(); ++i) sums[i] = counts[i] > 0.0 ? sums[i] / counts[i] : 0.0;
  return sums;
}

double qif_overhead_joules(std::size_t neurons, std::size_t timesteps, const EnergyConstants& k) {
  if (timesteps == 0) throw Error(ErrorKind::InvalidParams, "timesteps must be >= 1");
  return static_cast<double>(timesteps) * static_cast<double>(neurons) * k.e_mac;
}

EnergyReport energy_report(const NetworkSpec& spec, const std::vector<double>& spike_rates,
                           const EnergyConstants& k, const std::string& dataset) {
  k.validate();
  validate_spec(spec);
  for (double r : spike_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(ErrorKind::InvalidRate, "firing rate " + format_double(r) + " outside [0, 1]");
  }
  Walker w{spec, spike_rates, k, spec.timesteps, {}, 0};
  std::optional<double> drive;
  const Shape features = w.walk(spec.layers, spec.input_shape, drive, "layer");

  EnergyRow readout;
  readout.name = "readout";
  readout.kind = LayerKind::Dense;
  readout.firing_rate = drive.value_or(1.0);
  (drive ? readout.counts.op_ac : readout.counts.op_mac) =
      static_cast<double>(element_count(features)) * static_cast<double>(spec.classes);
  readout.joules = layer_energy(spec.timesteps, readout.firing_rate, readout.counts, k);
  w.rows.push_back(readout);

  EnergyReport r;
  r.architecture = spec.name;
  r.dataset = dataset;
  r.timesteps = spec.timesteps;
  r.neuron = spec.neuron.kind;
  r.constants = k;
  const double T = static_cast<double>(spec.timesteps);
  for (const auto& row : w.rows) {
    r.total_joules += row.joules;
    r.mac_ops += T * row.counts.op_mac;
    r.ac_ops += T * row.firing_rate * row.counts.op_ac;
    r.neurons += row.counts.neuron_count;
  }
  r.layers = std::move(w.rows);
  if (spec.neuron.kind == NeuronKind::Qif) {
    r.qif_overhead_joules = qif_overhead_joules(r.neurons, spec.timesteps, k);
    const double lif_total = r.total_joules - r.qif_overhead_joules;
    r.qif_overhead_percent = lif_total > 0.0 ? 100.0 * r.qif_overhead_joules / lif_total : 0.0;
  }
  return r;
}

QifOverhead qif_overhead(const NetworkSpec& spec, std::size_t timesteps, const std::vector<double>& spike_rates,
                         const EnergyConstants& k) {
  if (timesteps == 0) throw Error(ErrorKind::InvalidParams, "timesteps must be >= 1");
  NetworkSpec qif = spec;
  qif.timesteps = timesteps;
  qif.neuron.kind = NeuronKind::Qif;
  const EnergyReport r = energy_report(qif, spike_rates, k);
  return {r.qif_overhead_joules, r.qif_overhead_percent};
}

std::string EnergyReport::to_json() const {
  nlohmann::ordered_json j;
  j["architecture"] = architecture;
  j["dataset"] = dataset;
  j["timesteps"] = timesteps;
  j["neuron"] = neuron == NeuronKind::Qif ? "qif" : "lif";
  j["e_mac_pj"] = constants.e_mac * 1e12;
  j["e_ac_pj"] = constants.e_ac * 1e12;
  auto& rows = j["layers"] = nlohmann::ordered_json::array();
  for (const auto& l : layers) {
    rows.push_back({{"name", l.name},
                    {"kind", to_string(l.kind)},
                    {"firing_rate", l.firing_rate},
                    {"op_ac", l.counts.op_ac},
                    {"op_mac", l.counts.op_mac},
                    {"neurons", l.counts.neuron_count},
                    {"energy_j", l.joules}});
  }
  j["total_energy_j"] = total_joules;
  j["mac_ops"] = mac_ops;
  j["ac_ops"] = ac_ops;
  j["neurons"] = neurons;
  j["qif_overhead_j"] = qif_overhead_joules;
  j["qif_overhead_percent"] = qif_overhead_percent;
  return j.dump(2) + "\n";
}

std::string EnergyReport::to_csv() const {
  CsvWriter csv({"architecture", "dataset", "timesteps", "mac_ops", "ac_ops", "energy_mj", "overhead_mj",
                 "overhead_percent"});
  csv.row(architecture, dataset, timesteps, mac_ops, ac_ops, total_joules * 1e3, qif_overhead_joules * 1e3,
          qif_overhead_percent);
  return csv.str();
}

}  // namespace qifsnn

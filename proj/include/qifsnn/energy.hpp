#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qifsnn/network.hpp"

namespace qifsnn {

struct EnergyConstants {
  double e_mac = 4.6e-12;  // joules per multiply-accumulate, 32-bit float at 45 nm
  double e_ac = 0.9e-12;   // joules per accumulate

  void validate() const;
  bool operator==(const EnergyConstants&) const = default;
};

// Per-timestep operation counts of one layer.
struct LayerOpCounts {
  double op_ac = 0.0;
  double op_mac = 0.0;
  std::size_t neuron_count = 0;
};

// E = T (fr E_AC OP_AC + E_MAC OP_MAC)
double layer_energy(std::size_t timesteps, double fr, const LayerOpCounts& counts,
                    const EnergyConstants& k = {});

// Synaptic ops of dense/conv/pool layers are AC when the layer is driven by
// spikes and MAC when `real_input` (direct-encoded input). Spiking layers cost
// one MAC per LIF neuron update and two per QIF update. tdBN folds into the
// preceding layer and costs nothing; a residual block counts its addition.
LayerOpCounts count_ops(const LayerSpec& layer, const Shape& input, bool real_input, NeuronKind neuron);

// Mean of the binary spike tensor of one spiking layer.
double firing_rate(const ForwardRecord& record, std::size_t spiking_index);

// Firing rate of every spiking layer, averaged over all of `inputs` in Eval mode.
std::vector<double> measure_firing_rates(Network& net, const Tensor& inputs, std::size_t batch_size = 256);

struct QifOverhead {
  double joules = 0.0;
  double percent = 0.0;
};

// Extra MAC per neuron update: T * neurons * E_MAC.
double qif_overhead_joules(std::size_t neurons, std::size_t timesteps, const EnergyConstants& k = {});

struct EnergyRow {
  std::string name;
  LayerKind kind = LayerKind::Dense;
  double firing_rate = 0.0;  // rate of the spikes driving the AC term
  LayerOpCounts counts;
  double joules = 0.0;
};

struct EnergyReport {
  std::string architecture;
  std::string dataset;
  std::size_t timesteps = 0;
  NeuronKind neuron = NeuronKind::Qif;
  EnergyConstants constants;
  std::vector<EnergyRow> layers;
  double total_joules = 0.0;
  double mac_ops = 0.0;  // per inference, T * sum op_mac
  double ac_ops = 0.0;   // per inference, T * sum fr op_ac
  std::size_t neurons = 0;
  double qif_overhead_joules = 0.0;
  double qif_overhead_percent = 0.0;  // relative to the LIF-equivalent total

  std::string to_json() const;
  // "architecture,dataset,timesteps,mac_ops,ac_ops,energy_mj,overhead_mj,overhead_percent"
  std::string to_csv() const;
};

// `spike_rates` holds one rate per spiking layer in network order, nested
// residual branches included; missing entries count as 0. The readout is
// reported as a final dense row.
EnergyReport energy_report(const NetworkSpec& spec, const std::vector<double>& spike_rates,
                           const EnergyConstants& k = {}, const std::string& dataset = "");

// Overhead of running `spec` with QIF neurons instead of LIF, at the given rates.
QifOverhead qif_overhead(const NetworkSpec& spec, std::size_t timesteps,
                         const std::vector<double>& spike_rates = {}, const EnergyConstants& k = {});

}  // namespace qifsnn

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "qifsnn/dataset.hpp"
#include "qifsnn/dynamics.hpp"
#include "qifsnn/energy.hpp"
#include "qifsnn/network.hpp"
#include "qifsnn/train.hpp"

namespace qifsnn {

// How the QIF parameters were given; serialisation writes the same form back.
enum class QifForm { Roots, FixedPoints };

struct DataConfig {
  std::string source = "blobs";  // blobs | idx
  BlobOptions blobs;
  std::string train_images, train_labels, test_images, test_labels;

  bool operator==(const DataConfig&) const = default;
};

struct AnalyzeConfig {
  std::vector<double> initial_conditions{-0.4, -0.2, 0.1, 0.3, 0.4, 4.6};
  double grid_min = -1.0;
  double grid_max = 5.0;
  std::size_t grid_points = 121;
  TrajectoryOptions trajectory;

  std::vector<double> grid() const;
  bool operator==(const AnalyzeConfig&) const = default;
};

struct VerifyConfig {
  std::size_t samples = 1000000;
  double se_multiple = 5.0;  // agreement tolerance in standard errors

  bool operator==(const VerifyConfig&) const = default;
};

struct RunConfig {
  TrainConfig training;
  NeuronModel neuron;
  QifForm qif_form = QifForm::Roots;
  std::string network = "tiny_dense";  // tiny_dense | tiny_conv | tiny_res | custom
  std::string layers;                  // custom layer list
  std::size_t hidden = 32;             // tiny_dense width
  std::size_t classes = 0;             // 0: take from the dataset
  DataConfig data;
  EnergyConstants energy;
  std::string checkpoint;              // energy: checkpoint to load, empty = fresh init
  AnalyzeConfig analyze;
  VerifyConfig verify;
  std::uint64_t seed = 0;
  unsigned threads = 1;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// INI text: sections [run] [training] [neuron] [network] [data] [energy]
// [analyze] [verify]. Unknown sections or keys raise ConfigError.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const RunConfig& cfg);

// Builds the network for a dataset with the given per-sample shape.
NetworkSpec resolve_network(const RunConfig& cfg, const Shape& input_shape, std::size_t classes);

DatasetHandle load_dataset(const RunConfig& cfg);

}  // namespace qifsnn

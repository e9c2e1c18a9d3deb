#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "qifsnn/config.hpp"
#include "qifsnn/surrogate.hpp"

namespace qifsnn {

// Each command writes its artifacts atomically under `out` and returns a
// summary for the caller to print.

// stability.json, phase.csv and cobweb_<i>.csv ("step,u,u_next") per initial condition.
struct AnalyzeResult {
  std::vector<StabilityVerdict> fixed_points;
  std::vector<Trajectory> trajectories;
  std::vector<std::filesystem::path> files;
};
AnalyzeResult cmd_analyze(const RunConfig& cfg, const std::filesystem::path& out);

// verify.json
struct VerifyResult {
  MembraneMoments theory;
  MonteCarloStats sampled;
  double mean_tolerance = 0.0;
  double variance_tolerance = 0.0;
  bool pass = false;
  std::string json;
};
VerifyResult cmd_verify_theorem(const RunConfig& cfg, const std::filesystem::path& out);

// training_log.csv ("epoch,loss,train_acc,test_acc,lr"), timing.csv ("epoch,seconds"),
// checkpoint.bin and config.ini. Everything except timing.csv is reproducible.
struct TrainResult {
  TrainLog log;
  NetworkSpec spec;
};
TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& out,
                      const std::function<void(const EpochLog&)>& on_epoch = {});

// energy.json and energy.csv, firing rates measured on the test split.
EnergyReport cmd_energy(const RunConfig& cfg, const std::filesystem::path& out);

// cobweb.csv ("trajectory,u0,step,u,u_next") for every initial condition and
// map.csv ("u,u_next") sampling the zero-input map over the analyze grid.
std::vector<Trajectory> cmd_cobweb_export(const RunConfig& cfg, const std::filesystem::path& out);

}  // namespace qifsnn

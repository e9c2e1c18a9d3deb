#include "qifsnn/commands.hpp"

#include <cmath>
#include <json.hpp>

#include "qifsnn/checkpoint.hpp"
#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

namespace qifsnn {

namespace {

using Json = nlohmann::ordered_json;

Json params_json(const QifParams& p) {
  return {{"a", p.a()},   {"u1", p.u1()},     {"u2", p.u2()},          {"u_r", p.u_r()},
          {"u_c", p.u_c()}, {"u_th", p.u_th()}, {"u_reset", p.u_reset()}};
}

std::vector<Trajectory> trajectories(const RunConfig& cfg) {
  std::vector<Trajectory> out;
  for (double u0 : cfg.analyze.initial_conditions) {
    out.push_back(cobweb_trajectory(u0, cfg.neuron.qif, cfg.analyze.trajectory));
  }
  return out;
}

}  // namespace

AnalyzeResult cmd_analyze(const RunConfig& cfg, const std::filesystem::path& out) {
  const QifParams& p = cfg.neuron.qif;
  AnalyzeResult r;
  r.fixed_points = classify_fixed_points(p);
  r.trajectories = trajectories(cfg);

  Json j;
  j["params"] = params_json(p);
  j["u_min"] = u_min(p);
  auto& fps = j["fixed_points"] = Json::array();
  for (const auto& v : r.fixed_points) {
    fps.push_back({{"u", v.fixed_point}, {"derivative", v.derivative}, {"stability", to_string(v.label)}});
  }
  auto& tr = j["trajectories"] = Json::array();
  for (std::size_t i = 0; i < r.trajectories.size(); ++i) {
    const Trajectory& t = r.trajectories[i];
    const std::string file = "cobweb_" + std::to_string(i) + ".csv";
    tr.push_back({{"u0", cfg.analyze.initial_conditions[i]},
                  {"region", to_string(classify_region(cfg.analyze.initial_conditions[i], p))},
                  {"termination", to_string(t.terminated)},
                  {"steps", t.points.empty() ? 0 : t.points.back().step},
                  {"final_u", t.points.empty() ? 0.0 : t.points.back().u},
                  {"file", file}});
    write_file_atomic(out / file, cobweb_csv(t, p));
    r.files.push_back(out / file);
  }
  const auto grid = cfg.analyze.grid();
  write_file_atomic(out / "phase.csv", phase_csv(phase_portrait_samples(grid, p)));
  r.files.push_back(out / "phase.csv");
  write_file_atomic(out / "stability.json", j.dump(2) + "\n");
  r.files.push_back(out / "stability.json");
  return r;
}

VerifyResult cmd_verify_theorem(const RunConfig& cfg, const std::filesystem::path& out) {
  const QifParams& p = cfg.neuron.qif;
  VerifyResult r;
  r.theory = theorem1_stats(p);
  r.sampled = monte_carlo_stats(p, cfg.verify.samples, cfg.seed, cfg.threads);
  r.mean_tolerance = cfg.verify.se_multiple * r.sampled.se_mean;
  r.variance_tolerance = cfg.verify.se_multiple * r.sampled.se_variance;
  const double mean_err = std::abs(r.sampled.mean - r.theory.mean);
  const double var_err = std::abs(r.sampled.variance - r.theory.variance);
  r.pass = mean_err <= r.mean_tolerance && var_err <= r.variance_tolerance;

  const SurrogateWindow w = qif_window(p);
  Json j;
  j["params"] = params_json(p);
  j["mu_u"] = w.mu_u;
  j["sigma_u"] = w.sigma_u;
  j["sigma2_u"] = r.theory.variance;
  j["mc_mean"] = r.sampled.mean;
  j["mc_var"] = r.sampled.variance;
  j["se_mean"] = r.sampled.se_mean;
  j["se_var"] = r.sampled.se_variance;
  j["n"] = cfg.verify.samples;
  j["seed"] = cfg.seed;
  j["se_multiple"] = cfg.verify.se_multiple;
  j["abs_error"] = {{"mean", mean_err}, {"variance", var_err}};
  j["tolerance"] = {{"mean", r.mean_tolerance}, {"variance", r.variance_tolerance}};
  j["window"] = {{"lower", w.lower()}, {"upper", w.upper()}};
  j["verdict"] = r.pass ? "PASS" : "FAIL";
  r.json = j.dump(2) + "\n";
  write_file_atomic(out / "verify.json", r.json);
  return r;
}

TrainResult cmd_train(const RunConfig& cfg, const std::filesystem::path& out,
                      const std::function<void(const EpochLog&)>& on_epoch) {
  const DatasetHandle data = load_dataset(cfg);
  TrainResult r;
  r.spec = resolve_network(cfg, data.train.sample_shape(), data.train.classes);
  Network net(r.spec, cfg.seed);
  r.log = train(net, data.train, data.test, cfg.training, on_epoch);
  write_file_atomic(out / "training_log.csv", training_log_csv(r.log));
  CsvWriter timing({"epoch", "seconds"});
  for (const auto& e : r.log.epochs) timing.row(e.epoch, e.seconds);
  write_file_atomic(out / "timing.csv", timing.str());
  save_checkpoint(out / "checkpoint.bin", net);
  write_file_atomic(out / "config.ini", serialize_config(cfg));
  return r;
}

EnergyReport cmd_energy(const RunConfig& cfg, const std::filesystem::path& out) {
  const DatasetHandle data = load_dataset(cfg);
  const NetworkSpec spec = resolve_network(cfg, data.test.sample_shape(), data.test.classes);
  Network net(spec, cfg.seed);
  if (!cfg.checkpoint.empty()) load_checkpoint(cfg.checkpoint, net);
  const auto rates = measure_firing_rates(net, data.test.inputs);
  const std::string dataset = cfg.data.source == "blobs" ? "blobs" : std::filesystem::path(cfg.data.test_images).stem().string();
  EnergyReport report = energy_report(spec, rates, cfg.energy, dataset);
  write_file_atomic(out / "energy.json", report.to_json());
  write_file_atomic(out / "energy.csv", report.to_csv());
  return report;
}

std::vector<Trajectory> cmd_cobweb_export(const RunConfig& cfg, const std::filesystem::path& out) {
  const QifParams& p = cfg.neuron.qif;
  const auto traj = trajectories(cfg);
  CsvWriter cobweb({"trajectory", "u0", "step", "u", "u_next"});
  for (std::size_t i = 0; i < traj.size(); ++i) {
    for (const auto& pt : traj[i].points) {
      cobweb.row(i, cfg.analyze.initial_conditions[i], pt.step, pt.u, qif_step(pt.u, 0.0, p));
    }
  }
  CsvWriter map({"u", "u_next"});
  for (double u : cfg.analyze.grid()) map.row(u, qif_step(u, 0.0, p));
  write_file_atomic(out / "cobweb.csv", cobweb.str());
  write_file_atomic(out / "map.csv", map.str());
  return traj;
}

}  // namespace qifsnn

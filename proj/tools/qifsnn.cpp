#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <optional>

#include "qifsnn/commands.hpp"
#include "qifsnn/error.hpp"
#include "qifsnn/io.hpp"

using namespace qifsnn;

int main(int argc, char** argv) {
  CLI::App app{"QIF spiking network toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::string out = "out";
  std::string checkpoint;
  app.add_option("--config", config_path, "INI config file");
  app.add_option("--seed", seed, "master seed, overrides [run] seed");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--threads", threads, "worker threads for Monte Carlo sampling");

  auto* analyze = app.add_subcommand("analyze", "fixed points, stability, cobweb and phase samples");
  auto* verify = app.add_subcommand("verify-theorem", "Monte Carlo check of the membrane mean and variance");
  auto* train_cmd = app.add_subcommand("train", "train a network and write log and checkpoint");
  auto* energy = app.add_subcommand("energy", "estimate inference energy from measured firing rates");
  energy->add_option("--checkpoint", checkpoint, "checkpoint to evaluate, overrides [energy] checkpoint");
  auto* cobweb = app.add_subcommand("cobweb-export", "export cobweb trajectories and the zero-input map");
  for (auto* sub : {analyze, verify, train_cmd, energy, cobweb}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (seed) cfg.seed = cfg.training.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (!checkpoint.empty()) cfg.checkpoint = checkpoint;
    cfg.validate();

    if (analyze->parsed()) {
      const auto r = cmd_analyze(cfg, out);
      for (const auto& v : r.fixed_points) {
        std::printf("fixed point %s: g = %s, %s\n", format_double(v.fixed_point).c_str(),
                    format_double(v.derivative).c_str(), to_string(v.label));
      }
      std::printf("wrote %zu files to %s\n", r.files.size(), out.c_str());
    } else if (verify->parsed()) {
      const auto r = cmd_verify_theorem(cfg, out);
      std::printf("mean %s (theory %s), variance %s (theory %s)\n%s\n", format_double(r.sampled.mean).c_str(),
                  format_double(r.theory.mean).c_str(), format_double(r.sampled.variance).c_str(),
                  format_double(r.theory.variance).c_str(), r.pass ? "PASS" : "FAIL");
    } else if (train_cmd->parsed()) {
      const auto r = cmd_train(cfg, out, [](const EpochLog& e) {
        std::printf("epoch %zu  loss %.4f  train %.4f  test %.4f  (%.2fs)\n", e.epoch, e.loss, e.train_accuracy,
                    e.test_accuracy, e.seconds);
        std::fflush(stdout);
      });
      std::printf("best test accuracy: %.4f (epoch %zu)\n", r.log.best_test_accuracy, r.log.best_epoch);
    } else if (energy->parsed()) {
      const auto r = cmd_energy(cfg, out);
      std::printf("energy %s mJ, QIF overhead %s mJ (%s%%)\n", format_double(r.total_joules * 1e3).c_str(),
                  format_double(r.qif_overhead_joules * 1e3).c_str(), format_double(r.qif_overhead_percent).c_str());
    } else if (cobweb->parsed()) {
      const auto t = cmd_cobweb_export(cfg, out);
      std::printf("exported %zu trajectories to %s\n", t.size(), out.c_str());
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

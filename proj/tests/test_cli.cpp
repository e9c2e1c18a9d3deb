#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <string>

#include "qifsnn/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string output;
};

class Workdir {
 public:
  explicit Workdir(const std::string& name) : path_(fs::temp_directory_path() / ("qifsnn_cli_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~Workdir() { fs::remove_all(path_); }

  fs::path operator/(const std::string& p) const { return path_ / p; }

  Run run(const std::string& args) const {
    const fs::path log = path_ / "stdout.txt";
    const std::string cmd = std::string("\"") + QIFSNN_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, qifsnn::read_file(log)};
  }

  fs::path config(const std::string& name, const std::string& text) const {
    const fs::path p = path_ / name;
    qifsnn::write_file_atomic(p, text);
    return p;
  }

 private:
  fs::path path_;
};

json load_json(const fs::path& p) { return json::parse(qifsnn::read_file(p)); }

const char* kSmallTrain = R"(
[training]
surrogate = rectangle
epochs = 2
batch_size = 16
[network]
hidden = 8
[data]
per_class = 30
)";

}  // namespace

TEST_CASE("analyze with defaults") {
  Workdir w("analyze");
  const Run r = w.run("analyze --out " + (w / "out").string());
  REQUIRE(r.code == 0);
  const json j = load_json(w / "out/stability.json");
  REQUIRE(j.at("fixed_points").size() == 2);
  CHECK(j["fixed_points"][0]["u"] == 0.0);
  CHECK(j["fixed_points"][0]["stability"] == "Stable");
  CHECK(j["fixed_points"][1]["u"] == 4.5);
  CHECK(j["fixed_points"][1]["stability"] == "Unstable");
  CHECK(fs::exists(w / "out/phase.csv"));
  CHECK(fs::exists(w / "out/cobweb_5.csv"));
}

TEST_CASE("analyze rejects a negative discriminant") {
  Workdir w("negdisc");
  const auto cfg = w.config("bad.ini", "[neuron]\na = 1\nu_r = 2\nu_c = 3\n");
  const Run r = w.run("analyze --config " + cfg.string() + " --out " + (w / "out").string());
  CHECK(r.code == 2);
  CHECK(r.output.find("NegativeDiscriminant") != std::string::npos);
  CHECK_FALSE(fs::exists(w / "out/stability.json"));
}

TEST_CASE("analyze on a one-point grid") {
  Workdir w("grid");
  const auto cfg = w.config("g.ini", "[analyze]\ngrid_min = 0\ngrid_max = 0\ngrid_points = 1\n");
  REQUIRE(w.run("analyze --config " + cfg.string() + " --out " + (w / "out").string()).code == 0);
  CHECK(qifsnn::read_file(w / "out/phase.csv") == "u,delta\n0,0\n");
}

TEST_CASE("verify-theorem passes and is reproducible") {
  Workdir w("verify");
  const auto cfg = w.config("v.ini", "[verify]\nsamples = 200000\n");
  const Run a = w.run("verify-theorem --config " + cfg.string() + " --out " + (w / "a").string());
  const Run b = w.run("verify-theorem --config " + cfg.string() + " --out " + (w / "b").string() + " --threads 2");
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const json j = load_json(w / "a/verify.json");
  CHECK(j.at("verdict") == "PASS");
  CHECK(j.at("mu_u") == doctest::Approx(0.0625));
  CHECK(j.at("n") == 200000);
  CHECK(qifsnn::read_file(w / "a/verify.json") == qifsnn::read_file(w / "b/verify.json"));
}

TEST_CASE("verify-theorem with zero tolerance fails") {
  Workdir w("verify0");
  const auto cfg = w.config("v.ini", "[verify]\nsamples = 10000\nse_multiple = 0\n");
  w.run("verify-theorem --config " + cfg.string() + " --out " + (w / "out").string());
  CHECK(load_json(w / "out/verify.json").at("verdict") == "FAIL");
}

TEST_CASE("train writes identical outputs on rerun") {
  Workdir w("train");
  const auto cfg = w.config("t.ini", kSmallTrain);
  REQUIRE(w.run("train --config " + cfg.string() + " --seed 5 --out " + (w / "a").string()).code == 0);
  const Run r = w.run("train --config " + cfg.string() + " --seed 5 --out " + (w / "b").string());
  REQUIRE(r.code == 0);
  CHECK(r.output.find("best test accuracy") != std::string::npos);
  for (const char* f : {"training_log.csv", "checkpoint.bin", "config.ini"})
    CHECK(qifsnn::read_file(w / "a" / f) == qifsnn::read_file(w / "b" / f));
  CHECK(qifsnn::read_file(w / "a/training_log.csv").rfind("epoch,loss,train_acc,test_acc,lr\n", 0) == 0);
  // the saved config reproduces the run
  const fs::path saved = w / "a/config.ini";
  REQUIRE(w.run("train --config " + saved.string() + " --out " + (w / "c").string()).code == 0);
  CHECK(qifsnn::read_file(w / "a/checkpoint.bin") == qifsnn::read_file(w / "c/checkpoint.bin"));
}

TEST_CASE("energy from a trained checkpoint and LIF/QIF comparison") {
  Workdir w("energy");
  const auto qif = w.config("q.ini", kSmallTrain);
  REQUIRE(w.run("train --config " + qif.string() + " --out " + (w / "t").string()).code == 0);
  REQUIRE(w.run("energy --config " + qif.string() + " --checkpoint " + (w / "t/checkpoint.bin").string() +
                " --out " + (w / "e").string())
              .code == 0);
  const json e = load_json(w / "e/energy.json");
  CHECK(e.at("total_energy_j").get<double>() > 0.0);
  CHECK(fs::exists(w / "e/energy.csv"));

  // fresh networks: LIF reports no overhead, QIF one extra MAC per neuron update
  const auto q0 = w.config("q0.ini", std::string(kSmallTrain) + "[neuron]\nkind = qif\n");
  const auto l0 = w.config("l0.ini", std::string(kSmallTrain) + "[neuron]\nkind = lif\n");
  REQUIRE(w.run("energy --config " + q0.string() + " --out " + (w / "q").string()).code == 0);
  REQUIRE(w.run("energy --config " + l0.string() + " --out " + (w / "l").string()).code == 0);
  const json q = load_json(w / "q/energy.json");
  const json l = load_json(w / "l/energy.json");
  CHECK(q.at("neurons") == l.at("neurons"));
  CHECK(q.at("qif_overhead_j").get<double>() ==
        doctest::Approx(q.at("neurons").get<double>() * q.at("timesteps").get<double>() * 4.6e-12));
  CHECK(l.at("qif_overhead_j").get<double>() == 0.0);
  CHECK(q.at("mac_ops").get<double>() - l.at("mac_ops").get<double>() ==
        doctest::Approx(q.at("neurons").get<double>() * q.at("timesteps").get<double>()));
}

TEST_CASE("energy with a mismatched checkpoint") {
  Workdir w("energy_bad");
  const auto cfg = w.config("q.ini", kSmallTrain);
  qifsnn::write_file_atomic(w / "junk.bin", "not a checkpoint");
  const Run r = w.run("energy --config " + cfg.string() + " --checkpoint " + (w / "junk.bin").string() +
                      " --out " + (w / "e").string());
  CHECK(r.code == 3);
}

TEST_CASE("cobweb export") {
  Workdir w("cobweb");
  REQUIRE(w.run("cobweb-export --out " + (w / "out").string()).code == 0);
  const std::string cob = qifsnn::read_file(w / "out/cobweb.csv");
  CHECK(cob.rfind("trajectory,u0,step,u,u_next\n0,-0.4,0,-0.4,", 0) == 0);
  CHECK(qifsnn::read_file(w / "out/map.csv").rfind("u,u_next\n", 0) == 0);
}

TEST_CASE("usage and config errors exit with 2") {
  Workdir w("usage");
  CHECK(w.run("no-such-command").code == 2);
  CHECK(w.run("analyze --config " + (w / "missing.ini").string()).code != 0);
  const auto cfg = w.config("bad.ini", "[training]\nepochs = 0\n");
  CHECK(w.run("train --config " + cfg.string() + " --out " + (w / "out").string()).code == 2);
  const auto unk = w.config("unk.ini", "[nope]\nx = 1\n");
  CHECK(w.run("analyze --config " + unk.string() + " --out " + (w / "out").string()).code == 2);
}

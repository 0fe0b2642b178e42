#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "icsad/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "icsad");
  std::ostringstream out, err;
  const int code = icsad::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Two-feature sine series with a labelled burst near the end.
struct SineWorkspace {
  fs::path dir;
  fs::path config;

  SineWorkspace() {
    dir = fs::temp_directory_path() / ("icsad_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream csv(dir / "sine.csv");
    csv << "time,a,b,label\n";
    for (int i = 0; i < 200; ++i) {
      double a = std::sin(0.3 * i), b = std::cos(0.2 * i);
      const int attack = i >= 175 && i < 178;
      if (attack) a += 8.0;
      csv << i << ',' << a << ',' << b << ',' << attack << '\n';
    }
    config = dir / "run.toml";
    std::ofstream cfg(config);
    cfg << "seed = 5\n[dataset]\npath = \"sine.csv\"\n[window]\nsize = 4\n"
           "[autoencoder]\nhidden_dim = 6\nlatent_dim = 3\nepochs = 4\n"
           "[explain]\nbaselines = 8\nsamples = 16\n[gridsearch]\nsizes = [2, 4]\n";
  }
  ~SineWorkspace() { fs::remove_all(dir); }

  std::vector<std::string> args(const std::string& cmd, const std::string& out = "out") const {
    return {cmd, "--config", config.string(), "--out", (dir / out).string()};
  }
};

}  // namespace

TEST_CASE("train, detect, explain, eval and gridsearch on the sine fixture") {
  SineWorkspace ws;
  const auto out = ws.dir / "out";

  auto r = run(ws.args("train"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  REQUIRE(fs::exists(out / "model.json"));
  REQUIRE(fs::exists(out / "history.json"));
  REQUIRE(fs::exists(out / "config.resolved.toml"));
  const auto model = nlohmann::json::parse(slurp(out / "model.json"));
  CHECK(model.at("format_version") == 1);
  CHECK(model.at("feature_names") == std::vector<std::string>{"a", "b"});
  CHECK(model.at("autoencoder").at("window_length") == 4);
  const auto history = nlohmann::json::parse(slurp(out / "history.json"));
  CHECK(history.at("epochs_run") == 4);
  CHECK(history.at("epoch_loss").size() == 4);

  r = run(ws.args("detect"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto detections = slurp(out / "detections.csv");
  CHECK(detections.rfind("window_start,verdict,decision,score\n", 0) == 0);
  CHECK(std::count(detections.begin(), detections.end(), '\n') == 1 + 40 - 4 + 1);

  r = run(ws.args("explain"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  CHECK(slurp(out / "attributions.csv").rfind("window_id,timestep,feature_name,shap_value,feature_value\n", 0) == 0);
  CHECK(fs::exists(out / "summaries"));

  r = run(ws.args("eval"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  for (const char* key : {"true_positives", "false_positives", "true_negatives", "false_negatives",
                          "precision", "recall", "f1", "config", "wall_time_seconds"}) {
    CHECK(metrics.contains(key));
  }
  CHECK(metrics.at("true_positives").get<int>() + metrics.at("false_negatives").get<int>() == 6);

  r = run(ws.args("gridsearch"));
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto grid = nlohmann::json::parse(slurp(out / "gridsearch.json"));
  CHECK(grid.at("candidates").size() == 2);
  CHECK(grid.at("synthetic_validation") == true);

  // Same config and seed: byte-identical primary outputs.
  REQUIRE(run(ws.args("train", "again")).code == 0);
  REQUIRE(run(ws.args("detect", "again")).code == 0);
  REQUIRE(run(ws.args("explain", "again")).code == 0);
  CHECK(slurp(out / "model.json") == slurp(ws.dir / "again" / "model.json"));
  CHECK(detections == slurp(ws.dir / "again" / "detections.csv"));
  CHECK(slurp(out / "attributions.csv") == slurp(ws.dir / "again" / "attributions.csv"));

  // Flags override the config.
  auto args = ws.args("train", "w2");
  args.insert(args.end(), {"--window-size", "2", "--seed", "9"});
  REQUIRE(run(args).code == 0);
  const auto w2 = nlohmann::json::parse(slurp(ws.dir / "w2" / "model.json"));
  CHECK(w2.at("autoencoder").at("window_length") == 2);
  CHECK(w2.at("autoencoder").at("seed") == 9);
}

TEST_CASE("exit codes") {
  SineWorkspace ws;

  auto r = run({"frobnicate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("train") != std::string::npos);
  CHECK(r.err.find("icsad: error kind=usage code=1") != std::string::npos);

  CHECK(run({}).code == 1);
  CHECK(run({"train"}).code == 1);
  CHECK(run({"--help"}).code == 0);

  std::ofstream(ws.dir / "bad.toml") << "[dataset]\npath = \"sine.csv\"\n[ocsvm]\nnu = 1.5\n";
  r = run({"train", "--config", (ws.dir / "bad.toml").string(), "--out", (ws.dir / "o").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("kind=config") != std::string::npos);
  CHECK(r.err.find("nu") != std::string::npos);

  std::ofstream(ws.dir / "missing.toml") << "[dataset]\npath = \"nope.csv\"\n";
  r = run({"train", "--config", (ws.dir / "missing.toml").string(), "--out", (ws.dir / "o").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("kind=data") != std::string::npos);

  REQUIRE(run(ws.args("train")).code == 0);
  REQUIRE(run(ws.args("detect")).code == 0);
  std::ofstream(ws.dir / "labels.txt") << "0\n1\n0\n";
  auto args = ws.args("eval");
  args.insert(args.end(), {"--labels", (ws.dir / "labels.txt").string()});
  r = run(args);
  CHECK(r.code == 2);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);

  args = ws.args("detect");
  args.insert(args.end(), {"--window-size", "3"});
  CHECK(run(args).code == 2);

  std::ofstream(ws.dir / "tiny.toml")
      << "[dataset]\npath = \"sine.csv\"\n[window]\nsize = 4\n[autoencoder]\nepochs = 1\n"
         "hidden_dim = 4\nlatent_dim = 2\n[ocsvm]\nmax_iterations = 1\ntolerance = 1e-12\n";
  r = run({"train", "--config", (ws.dir / "tiny.toml").string(), "--out", (ws.dir / "t").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("kind=numeric") != std::string::npos);
}

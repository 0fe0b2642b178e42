#include "icsad/cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "icsad/config.hpp"
#include "icsad/error.hpp"
#include "icsad/model_io.hpp"

namespace icsad::cli {
namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> window_size;
  std::optional<std::string> format;
};

struct Flags {
  CommonFlags common;
  std::string model_path;
  std::string detections_path;
  std::string labels_path;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Run configuration file")->required();
  cmd->add_option("--out", f.out_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--seed", f.seed, "Global seed (overrides the config)");
  cmd->add_option("--window-size", f.window_size, "Sliding window length")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--format", f.format, "Dataset format")->check(CLI::IsMember({"csv", "arff"}));
}

config::RunConfig resolve_config(const CommonFlags& f) {
  auto cfg = config::load_config(f.config_path);
  if (f.seed) cfg.seed = *f.seed;
  if (f.window_size) cfg.window_size = *f.window_size;
  if (f.format) cfg.format = ingest::parse_format(*f.format);
  if (!f.out_dir.empty()) cfg.output_dir = f.out_dir;
  if (cfg.output_dir.empty()) throw ConfigError("output.dir", "no output directory (use --out)");
  config::validate(cfg);
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::string in_out(const config::RunConfig& cfg, const std::string& name) {
  return (fs::path(cfg.output_dir) / name).string();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << text;
}

std::pair<ingest::RecordTable, ingest::RecordTable> load_split(const config::RunConfig& cfg) {
  const auto table = ingest::load_dataset(cfg.dataset_path, cfg.format);
  return ingest::split_train_test(table, cfg.train_fraction);
}

pipeline::FittedPipeline load_model(const config::RunConfig& cfg, const std::string& model_path) {
  return io::load_pipeline(model_path.empty() ? in_out(cfg, "model.json") : model_path);
}

void check_features(const pipeline::FittedPipeline& fitted, const ingest::RecordTable& table) {
  if (fitted.feature_names != table.feature_names) {
    throw DataError("dataset features do not match the model's features");
  }
}

int cmd_train(const Flags& flags, std::ostream& out) {
  const auto cfg = resolve_config(flags.common);
  const auto params = config::to_pipeline_params(cfg);
  const auto [train, test] = load_split(cfg);
  const auto fitted = pipeline::fit_pipeline(train, params);
  if (!fitted.ocsvm_converged) {
    throw NumericError("OCSVM solver did not converge within " +
                       std::to_string(cfg.max_iterations) + " iterations");
  }
  io::save_pipeline(fitted, in_out(cfg, "model.json"));
  write_text(in_out(cfg, "history.json"), io::to_json(fitted.history).dump(1) + "\n");
  write_text(in_out(cfg, "config.resolved.toml"), config::echo(cfg));
  out << "trained on " << train.num_rows() << " rows; final loss "
      << (fitted.history.epoch_loss.empty() ? 0.0 : fitted.history.epoch_loss.back()) << "; "
      << fitted.ocsvm.alpha.size() << " support vectors\n";
  return kOk;
}

int cmd_detect(const Flags& flags, std::ostream& out, bool with_explanations) {
  const auto cfg = resolve_config(flags.common);
  const auto fitted = load_model(cfg, flags.model_path);
  if (flags.common.window_size && *flags.common.window_size != fitted.autoencoder.window_length) {
    throw DataError("--window-size " + std::to_string(*flags.common.window_size) +
                    " differs from the model's window length " +
                    std::to_string(fitted.autoencoder.window_length));
  }
  const auto [train, test] = load_split(cfg);
  check_features(fitted, test);
  const auto windows = pipeline::prepare_windows(fitted, test);

  std::optional<pipeline::ExplainParams> explain;
  if (with_explanations) explain = pipeline::explain_params_for(fitted, config::to_pipeline_params(cfg));
  const auto detections = pipeline::detect(fitted.autoencoder, fitted.ocsvm, windows,
                                           fitted.residual_mode, explain ? &*explain : nullptr);

  std::size_t anomalies = 0;
  for (const auto& d : detections) anomalies += d.verdict == ocsvm::Verdict::kAnomaly;

  if (!with_explanations) {
    std::ofstream csv(in_out(cfg, "detections.csv"), std::ios::binary);
    io::write_detections_csv(csv, detections);
    out << anomalies << " of " << detections.size() << " windows flagged\n";
  } else {
    std::ofstream csv(in_out(cfg, "attributions.csv"), std::ios::binary);
    io::write_attributions_csv(csv, detections, windows, fitted);
    const auto summary_dir = fs::path(cfg.output_dir) / "summaries";
    fs::create_directories(summary_dir);
    for (const auto& d : detections) {
      if (!d.attribution) continue;
      std::ofstream s(summary_dir / ("window_" + std::to_string(d.start_index) + ".csv"),
                      std::ios::binary);
      io::write_summary_csv(s, explain::aggregate_per_feature(*d.attribution), fitted.feature_names);
    }
    out << "explained " << anomalies << " anomalous windows\n";
  }
  write_text(in_out(cfg, "config.resolved.toml"), config::echo(cfg));
  return kOk;
}

std::vector<int> read_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open labels file '" + path + "'");
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line != "0" && line != "1") throw ParseError("label must be 0 or 1", line_no);
    labels.push_back(line == "1");
  }
  return labels;
}

int cmd_eval(const Flags& flags, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = resolve_config(flags.common);
  std::ifstream det_in(flags.detections_path.empty() ? in_out(cfg, "detections.csv")
                                                     : flags.detections_path);
  if (!det_in) throw DataError("cannot open detections file");
  const auto rows = io::read_detections_csv(det_in);

  std::vector<int> labels;
  if (!flags.labels_path.empty()) {
    labels = read_labels(flags.labels_path);
  } else {
    std::size_t l = cfg.window_size;
    const auto model_path = flags.model_path.empty() ? in_out(cfg, "model.json") : flags.model_path;
    if (fs::exists(model_path)) l = io::load_pipeline(model_path).autoencoder.window_length;
    const auto [train, test] = load_split(cfg);
    if (!test.labels) throw DataError("dataset has no label column and no --labels file was given");
    labels = pipeline::window_labels(ingest::make_windows(test, l));
  }

  std::vector<pipeline::Detection> detections;
  for (const auto& r : rows) {
    pipeline::Detection d;
    d.start_index = r.window_start;
    d.verdict = r.verdict;
    d.decision = r.decision;
    d.score = r.score;
    detections.push_back(d);
  }
  const auto metrics = pipeline::evaluate(detections, labels);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  auto report = io::to_json(metrics);
  report["config"] = config::echo(cfg);
  report["wall_time_seconds"] = {{"eval", seconds}};
  write_text(in_out(cfg, "metrics.json"), report.dump(1) + "\n");
  out << "precision " << metrics.precision << " recall " << metrics.recall << " f1 " << metrics.f1
      << "\n";
  return kOk;
}

int cmd_gridsearch(const Flags& flags, std::ostream& out) {
  const auto cfg = resolve_config(flags.common);
  const auto [train, test] = load_split(cfg);
  const auto report =
      pipeline::grid_search(train, cfg.grid_sizes, config::to_pipeline_params(cfg), cfg.seed);
  write_text(in_out(cfg, "gridsearch.json"), io::to_json(report).dump(1) + "\n");
  write_text(in_out(cfg, "config.resolved.toml"), config::echo(cfg));
  out << "selected window size " << report.selected << "\n";
  return kOk;
}

int fail(std::ostream& err, const char* kind, int code, const std::string& message) {
  std::string flat = message;
  for (auto& c : flat) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  err << "icsad: error kind=" << kind << " code=" << code << ": " << flat << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Explainable anomaly detection for ICS telemetry", "icsad"};
  app.require_subcommand(1);
  Flags flags;
  auto* train = app.add_subcommand("train", "Fit scaler, autoencoder and OCSVM on the training split");
  auto* detect = app.add_subcommand("detect", "Classify test windows; writes detections.csv");
  auto* explain = app.add_subcommand("explain", "Attribute anomalous test windows to their inputs");
  auto* eval = app.add_subcommand("eval", "Precision / recall / F1 of detections.csv");
  auto* grid = app.add_subcommand("gridsearch", "Select the window size on a validation slice");
  for (auto* cmd : {train, detect, explain, eval, grid}) add_common(cmd, flags.common);
  for (auto* cmd : {detect, explain, eval}) {
    cmd->add_option("--model", flags.model_path, "Model file (default <out>/model.json)");
  }
  eval->add_option("--detections", flags.detections_path, "Detections CSV (default <out>/detections.csv)");
  eval->add_option("--labels", flags.labels_path, "Window labels, one 0/1 per line");

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << app.help();
    return fail(err, "usage", kUsageError, e.what());
  }

  try {
    if (train->parsed()) return cmd_train(flags, out);
    if (detect->parsed()) return cmd_detect(flags, out, false);
    if (explain->parsed()) return cmd_detect(flags, out, true);
    if (eval->parsed()) return cmd_eval(flags, out);
    if (grid->parsed()) return cmd_gridsearch(flags, out);
  } catch (const ConfigError& e) {
    return fail(err, "config", kUsageError, e.what());
  } catch (const NumericError& e) {
    return fail(err, "numeric", kNumericError, e.what());
  } catch (const Error& e) {
    return fail(err, "data", kDataError, e.what());
  } catch (const std::exception& e) {
    return fail(err, "data", kDataError, e.what());
  }
  return fail(err, "usage", kUsageError, "no subcommand");
}

}  // namespace icsad::cli

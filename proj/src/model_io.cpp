#include "icsad/model_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "icsad/error.hpp"

namespace icsad::io {

using nlohmann::json;

namespace {

Eigen::VectorXd vector_from_json(const json& j) {
  const Eigen::MatrixXd m = matrix_from_json(j);
  if (m.cols() != 1) throw DataError("model file: expected a column vector");
  return m.col(0);
}

void expect_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols,
                  std::string_view name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DataError("model file: tensor '" + std::string(name) + "' is " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", expected " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw DataError(std::string("model file: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: field '") + key + "': " + e.what());
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  const auto rows = field<Eigen::Index>(j, "rows");
  const auto cols = field<Eigen::Index>(j, "cols");
  const auto data = field<std::vector<double>>(j, "data");
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size()) {
    throw DataError("model file: matrix data length does not match rows x cols");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json to_json(const autoencoder::AutoencoderModel& model) {
  json tensors = json::object();
  model.params.for_each([&](std::string_view name, const auto& t) {
    tensors[std::string(name)] = matrix_to_json(Eigen::MatrixXd(t));
  });
  return json{{"num_features", model.num_features}, {"window_length", model.window_length},
              {"hidden_dim", model.hidden_dim},     {"latent_dim", model.latent_dim},
              {"seed", model.seed},                 {"tensors", tensors}};
}

autoencoder::AutoencoderModel autoencoder_from_json(const json& j) {
  const auto m = field<std::size_t>(j, "num_features");
  const auto l = field<std::size_t>(j, "window_length");
  const auto h = field<std::size_t>(j, "hidden_dim");
  const auto z = field<std::size_t>(j, "latent_dim");
  if (m < 1 || l < 1 || h < 1 || z < 1) throw DataError("model file: autoencoder dimensions must be >= 1");
  autoencoder::AutoencoderModel model = autoencoder::init_model(m, l, h, z, 0);
  model.seed = field<std::uint64_t>(j, "seed");
  const auto& tensors = j.at("tensors");
  model.params.for_each([&](std::string_view name, auto& t) {
    const std::string key(name);
    if (!tensors.contains(key)) throw DataError("model file: missing tensor '" + key + "'");
    const Eigen::MatrixXd loaded = matrix_from_json(tensors.at(key));
    expect_shape(loaded, t.rows(), t.cols(), name);
    t = loaded;
  });
  return model;
}

json to_json(const ocsvm::OcsvmModel& model) {
  return json{{"gamma", model.gamma},
              {"rho", model.rho},
              {"alpha", matrix_to_json(model.alpha)},
              {"support_vectors", matrix_to_json(model.support_vectors)}};
}

ocsvm::OcsvmModel ocsvm_from_json(const json& j) {
  ocsvm::OcsvmModel model;
  model.gamma = field<double>(j, "gamma");
  model.rho = field<double>(j, "rho");
  model.alpha = vector_from_json(j.at("alpha"));
  model.support_vectors = matrix_from_json(j.at("support_vectors"));
  if (model.alpha.size() != model.support_vectors.rows()) {
    throw DataError("model file: alpha and support vector counts differ");
  }
  return model;
}

json to_json(const pipeline::FittedPipeline& fitted) {
  json baselines = json::array();
  for (const auto& b : fitted.baselines.windows) baselines.push_back(matrix_to_json(b));
  return json{
      {"format_version", kFormatVersion},
      {"feature_names", fitted.feature_names},
      {"residual_mode", pipeline::to_string(fitted.residual_mode)},
      {"scaler",
       {{"minimum", matrix_to_json(fitted.scaler.minimum)},
        {"maximum", matrix_to_json(fitted.scaler.maximum)}}},
      {"autoencoder", to_json(fitted.autoencoder)},
      {"ocsvm", to_json(fitted.ocsvm)},
      {"ocsvm_fit", {{"converged", fitted.ocsvm_converged}, {"iterations", fitted.ocsvm_iterations}}},
      {"explain", {{"baselines", baselines}}},
  };
}

pipeline::FittedPipeline pipeline_from_json(const json& j) {
  const auto version = field<int>(j, "format_version");
  if (version != kFormatVersion) {
    throw DataError("model file: unsupported format_version " + std::to_string(version) +
                    " (expected " + std::to_string(kFormatVersion) + ")");
  }
  pipeline::FittedPipeline fitted;
  try {
    fitted.feature_names = field<std::vector<std::string>>(j, "feature_names");
    fitted.residual_mode = pipeline::parse_residual_mode(field<std::string>(j, "residual_mode"));
    fitted.scaler.minimum = vector_from_json(j.at("scaler").at("minimum"));
    fitted.scaler.maximum = vector_from_json(j.at("scaler").at("maximum"));
    fitted.autoencoder = autoencoder_from_json(j.at("autoencoder"));
    fitted.ocsvm = ocsvm_from_json(j.at("ocsvm"));
    fitted.ocsvm_converged = field<bool>(j.at("ocsvm_fit"), "converged");
    fitted.ocsvm_iterations = field<std::size_t>(j.at("ocsvm_fit"), "iterations");
    for (const auto& b : j.at("explain").at("baselines")) {
      fitted.baselines.windows.push_back(matrix_from_json(b));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  const auto m = fitted.autoencoder.num_features;
  if (fitted.feature_names.size() != m || static_cast<std::size_t>(fitted.scaler.minimum.size()) != m ||
      static_cast<std::size_t>(fitted.scaler.maximum.size()) != m) {
    throw DataError("model file: feature count mismatch between sections");
  }
  return fitted;
}

void save_pipeline(const pipeline::FittedPipeline& fitted, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << to_json(fitted).dump(1) << '\n';
}

pipeline::FittedPipeline load_pipeline(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("model file '" + path + "' is not valid JSON: " + e.what());
  }
  return pipeline_from_json(j);
}

json to_json(const autoencoder::TrainingHistory& history) {
  return json{{"epochs_run", history.epochs_run}, {"epoch_loss", history.epoch_loss}};
}

json to_json(const pipeline::Metrics& m) {
  return json{{"true_positives", m.true_positives}, {"false_positives", m.false_positives},
              {"true_negatives", m.true_negatives}, {"false_negatives", m.false_negatives},
              {"precision", m.precision},           {"recall", m.recall},
              {"f1", m.f1}};
}

json to_json(const pipeline::GridSearchReport& report) {
  json candidates = json::array();
  for (const auto& c : report.candidates) {
    candidates.push_back(
        {{"window_size", c.window_size}, {"metrics", to_json(c.metrics)}, {"seconds", c.seconds}});
  }
  return json{{"candidates", candidates},
              {"selected_window_size", report.selected},
              {"synthetic_validation", report.synthetic_validation}};
}

void write_detections_csv(std::ostream& out, const std::vector<pipeline::Detection>& detections) {
  out << "window_start,verdict,decision,score\n";
  for (const auto& d : detections) {
    out << d.start_index << ',' << ocsvm::to_string(d.verdict) << ',' << format_double(d.decision)
        << ',' << format_double(d.score) << '\n';
  }
}

std::vector<DetectionRow> read_detections_csv(std::istream& in) {
  std::vector<DetectionRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "window_start,verdict,decision,score") throw ParseError("unexpected detections header", 1);
      continue;
    }
    std::stringstream ss(line);
    std::string start, verdict, decision, score;
    if (!std::getline(ss, start, ',') || !std::getline(ss, verdict, ',') ||
        !std::getline(ss, decision, ',') || !std::getline(ss, score)) {
      throw ParseError("expected 4 fields", line_no);
    }
    DetectionRow r;
    try {
      r.window_start = std::stoull(start);
      r.decision = std::stod(decision);
      r.score = std::stod(score);
    } catch (const std::exception&) {
      throw ParseError("malformed number", line_no);
    }
    if (verdict == "anomaly") r.verdict = ocsvm::Verdict::kAnomaly;
    else if (verdict == "normal") r.verdict = ocsvm::Verdict::kNormal;
    else throw ParseError("unknown verdict '" + verdict + "'", line_no);
    rows.push_back(r);
  }
  if (line_no == 0) throw ParseError("empty detections file");
  return rows;
}

void write_attributions_csv(std::ostream& out, const std::vector<pipeline::Detection>& detections,
                            const std::vector<ingest::Window>& windows,
                            const pipeline::FittedPipeline& fitted) {
  if (detections.size() != windows.size()) {
    throw InvalidArgument("write_attributions_csv: detections and windows differ in length");
  }
  const auto& names = fitted.feature_names;
  out << "window_id,timestep,feature_name,shap_value,feature_value\n";
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const auto& det = detections[i];
    if (!det.attribution) continue;
    const auto& a = det.attribution->values;
    for (Eigen::Index t = 0; t < a.rows(); ++t) {
      for (Eigen::Index k = 0; k < a.cols(); ++k) {
        const double span = fitted.scaler.maximum[k] - fitted.scaler.minimum[k];
        const double raw = windows[i].values(t, k) * span + fitted.scaler.minimum[k];
        out << det.start_index << ',' << t << ',' << names[static_cast<std::size_t>(k)] << ','
            << format_double(a(t, k)) << ',' << format_double(raw) << '\n';
      }
    }
  }
}

void write_summary_csv(std::ostream& out, const explain::FeatureSummary& summary,
                       const std::vector<std::string>& feature_names) {
  out << "feature_name,signed_sum,mean_abs,rank\n";
  for (std::size_t r = 0; r < summary.ranking.size(); ++r) {
    const auto k = summary.ranking[r];
    const auto kk = static_cast<Eigen::Index>(k);
    out << feature_names[k] << ',' << format_double(summary.signed_sum[kk]) << ','
        << format_double(summary.mean_abs[kk]) << ',' << r + 1 << '\n';
  }
}

}  // namespace icsad::io

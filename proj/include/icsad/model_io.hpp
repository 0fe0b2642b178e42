#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "icsad/pipeline.hpp"

// Persistence of fitted models and the plot-ready / report outputs.
namespace icsad::io {

/// Version written to and required from model files.
inline constexpr int kFormatVersion = 1;

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j);

nlohmann::json to_json(const autoencoder::AutoencoderModel& model);
autoencoder::AutoencoderModel autoencoder_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ocsvm::OcsvmModel& model);
ocsvm::OcsvmModel ocsvm_from_json(const nlohmann::json& j);

nlohmann::json to_json(const pipeline::FittedPipeline& fitted);
/// Throws DataError on an unknown format_version or inconsistent shapes.
pipeline::FittedPipeline pipeline_from_json(const nlohmann::json& j);

void save_pipeline(const pipeline::FittedPipeline& fitted, const std::string& path);
pipeline::FittedPipeline load_pipeline(const std::string& path);

nlohmann::json to_json(const autoencoder::TrainingHistory& history);
nlohmann::json to_json(const pipeline::Metrics& metrics);
nlohmann::json to_json(const pipeline::GridSearchReport& report);

/// window_start,verdict,decision,score
void write_detections_csv(std::ostream& out, const std::vector<pipeline::Detection>& detections);

struct DetectionRow {
  std::size_t window_start = 0;
  ocsvm::Verdict verdict = ocsvm::Verdict::kNormal;
  double decision = 0.0;
  double score = 0.0;
};
std::vector<DetectionRow> read_detections_csv(std::istream& in);

/// window_id,timestep,feature_name,shap_value,feature_value for every explained
/// detection. feature_value is in original units.
void write_attributions_csv(std::ostream& out, const std::vector<pipeline::Detection>& detections,
                            const std::vector<ingest::Window>& windows,
                            const pipeline::FittedPipeline& fitted);

/// feature_name,signed_sum,mean_abs,rank for one explained window (rank 1 = most important).
void write_summary_csv(std::ostream& out, const explain::FeatureSummary& summary,
                       const std::vector<std::string>& feature_names);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace icsad::io

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "icsad/autoencoder.hpp"
#include "icsad/explain.hpp"
#include "icsad/ingest.hpp"
#include "icsad/ocsvm.hpp"

namespace icsad::pipeline {

enum class ResidualMode { kAggregated, kFlattened };

ResidualMode parse_residual_mode(std::string_view tag);
const char* to_string(ResidualMode mode);

/// aggregated: value k = (1/l) sum_t |X[t][k] - Xhat[t][k]|  (d = m)
/// flattened:  row-major |X - Xhat|                           (d = l m)
struct ResidualVector {
  Eigen::VectorXd values;
  ResidualMode mode = ResidualMode::kAggregated;
};

ResidualVector residual_vector(const Eigen::MatrixXd& window, const Eigen::MatrixXd& reconstruction,
                               ResidualMode mode);

/// What the explainer attributes.
enum class ExplainTarget {
  kSurrogate,        // s(X) = sum (X - Xhat)^2
  kFlattenedOutput,  // one entry of the flattened reconstruction
};

ExplainTarget parse_explain_target(std::string_view tag);
const char* to_string(ExplainTarget target);

struct ExplainParams {
  explain::BaselineSet baselines;
  std::size_t n_samples = 200;
  std::uint64_t seed = 0;  // per-window seeds are derived from this and the window start
  ExplainTarget target = ExplainTarget::kSurrogate;
  std::size_t output_index = 0;  // used with kFlattenedOutput
};

struct Detection {
  std::size_t start_index = 0;
  ocsvm::Verdict verdict = ocsvm::Verdict::kNormal;
  double decision = 0.0;
  double score = 0.0;  // surrogate s(X)
  std::optional<explain::AttributionMatrix> attribution;
};

/// Anomaly surrogate of a trained autoencoder as an explainable score.
class SurrogateScore final : public explain::ScoreFunction {
 public:
  explicit SurrogateScore(const autoencoder::AutoencoderModel& model) : model_(model) {}
  double value(const Eigen::MatrixXd& x) const override;
  void evaluate(std::span<const Eigen::MatrixXd> points, std::vector<double>& values,
                std::vector<Eigen::MatrixXd>& gradients) const override;

 private:
  const autoencoder::AutoencoderModel& model_;
};

/// One entry of the flattened reconstruction as an explainable score.
class FlattenedOutputScore final : public explain::ScoreFunction {
 public:
  FlattenedOutputScore(const autoencoder::AutoencoderModel& model, std::size_t index)
      : model_(model), index_(index) {}
  double value(const Eigen::MatrixXd& x) const override;
  void evaluate(std::span<const Eigen::MatrixXd> points, std::vector<double>& values,
                std::vector<Eigen::MatrixXd>& gradients) const override;

 private:
  const autoencoder::AutoencoderModel& model_;
  std::size_t index_;
};

/// Reconstruct, compute residuals, classify; explain anomalies when `explain_params` is set.
/// Output order follows `windows`.
std::vector<Detection> detect(const autoencoder::AutoencoderModel& ae,
                              const ocsvm::OcsvmModel& svm,
                              const std::vector<ingest::Window>& windows, ResidualMode mode,
                              const ExplainParams* explain_params = nullptr);

struct Metrics {
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t true_negatives = 0;
  std::size_t false_negatives = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Derived ratios with the zero-denominator convention (0, not undefined).
Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn);

/// Harmonic mean, 0 when precision + recall = 0.
double f1_score(double precision, double recall);

/// Per-window metrics; anomaly is the positive class.
Metrics evaluate(const std::vector<Detection>& detections, std::span<const int> window_labels);

/// Everything needed to run the method end to end.
struct PipelineParams {
  std::size_t window_length = 8;
  std::size_t hidden_dim = 32;
  std::size_t latent_dim = 16;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::optional<double> clip_norm;
  ocsvm::OcsvmConfig ocsvm;
  ResidualMode residual_mode = ResidualMode::kAggregated;
  std::size_t baseline_count = 100;
  std::size_t explain_samples = 200;
  ExplainTarget explain_target = ExplainTarget::kSurrogate;
  std::size_t explain_output_index = 0;
  double train_fraction = 0.8;
  std::uint64_t seed = 42;
};

struct FittedPipeline {
  ingest::Scaler scaler;
  autoencoder::AutoencoderModel autoencoder;
  autoencoder::TrainingHistory history;
  ocsvm::OcsvmModel ocsvm;
  bool ocsvm_converged = true;
  std::size_t ocsvm_iterations = 0;
  ResidualMode residual_mode = ResidualMode::kAggregated;
  explain::BaselineSet baselines;  // scaled normal training windows
  std::vector<std::string> feature_names;
};

/// Fits scaler (normal rows), autoencoder and OCSVM (normal windows) on `train`.
FittedPipeline fit_pipeline(const ingest::RecordTable& train, const PipelineParams& params);

ExplainParams explain_params_for(const FittedPipeline& fitted, const PipelineParams& params);

/// Scales `table` with the fitted scaler and cuts it into windows.
std::vector<ingest::Window> prepare_windows(const FittedPipeline& fitted,
                                            const ingest::RecordTable& table);

std::vector<int> window_labels(const std::vector<ingest::Window>& windows);

struct GridCandidate {
  std::size_t window_size = 0;
  Metrics metrics;
  double seconds = 0.0;
};

struct GridSearchReport {
  std::vector<GridCandidate> candidates;
  std::size_t selected = 0;
  bool synthetic_validation = false;
};

inline const std::vector<std::size_t> kDefaultWindowCandidates = {4, 8, 16, 32};

/// Window size with the highest F1; ties go to the smaller window.
std::size_t select_window(std::span<const GridCandidate> candidates);

/// Fits on the first 80% of `train` and scores each candidate on the last 20%.
/// Unlabelled (or attack-free) validation slices get seeded synthetic injections.
/// Highest F1 wins; ties go to the smaller window.
GridSearchReport grid_search(const ingest::RecordTable& train,
                             std::span<const std::size_t> candidate_sizes,
                             const PipelineParams& params, std::uint64_t seed);

}  // namespace icsad::pipeline

#include "icsad/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <string>

#include "icsad/error.hpp"
#include "icsad/random.hpp"
#include "icsad/synthetic.hpp"

namespace icsad::pipeline {
namespace {

constexpr std::size_t kReconstructChunk = 1024;

// Seed streams derived from the global seed.
enum SeedStream : std::uint64_t {
  kInitStream = 0,
  kShuffleStream = 1,
  kBaselineStream = 2,
  kExplainStream = 3,
  kValidationStream = 4,
};

std::vector<Eigen::MatrixXd> values_of(const std::vector<ingest::Window>& windows) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(windows.size());
  for (const auto& w : windows) out.push_back(w.values);
  return out;
}

std::vector<Eigen::MatrixXd> reconstruct_all(const autoencoder::AutoencoderModel& ae,
                                             const std::vector<Eigen::MatrixXd>& windows) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(windows.size());
  for (std::size_t begin = 0; begin < windows.size(); begin += kReconstructChunk) {
    const std::size_t count = std::min(kReconstructChunk, windows.size() - begin);
    auto part = autoencoder::reconstruct(ae, std::span(windows).subspan(begin, count));
    for (auto& r : part) out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

ResidualMode parse_residual_mode(std::string_view tag) {
  if (tag == "aggregated") return ResidualMode::kAggregated;
  if (tag == "flattened") return ResidualMode::kFlattened;
  throw InvalidArgument("unknown residual mode '" + std::string(tag) + "'");
}

const char* to_string(ResidualMode mode) {
  return mode == ResidualMode::kAggregated ? "aggregated" : "flattened";
}

ExplainTarget parse_explain_target(std::string_view tag) {
  if (tag == "surrogate") return ExplainTarget::kSurrogate;
  if (tag == "flattened") return ExplainTarget::kFlattenedOutput;
  throw InvalidArgument("unknown explain target '" + std::string(tag) + "'");
}

const char* to_string(ExplainTarget target) {
  return target == ExplainTarget::kSurrogate ? "surrogate" : "flattened";
}

ResidualVector residual_vector(const Eigen::MatrixXd& window, const Eigen::MatrixXd& reconstruction,
                               ResidualMode mode) {
  if (window.rows() != reconstruction.rows() || window.cols() != reconstruction.cols()) {
    throw InvalidArgument("residual_vector: shape mismatch");
  }
  const Eigen::MatrixXd abs_diff = (window - reconstruction).cwiseAbs();
  ResidualVector r;
  r.mode = mode;
  if (mode == ResidualMode::kAggregated) {
    r.values = abs_diff.colwise().sum().transpose() / static_cast<double>(window.rows());
  } else {
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> row_major = abs_diff;
    r.values = Eigen::Map<const Eigen::VectorXd>(row_major.data(), row_major.size());
  }
  return r;
}

double SurrogateScore::value(const Eigen::MatrixXd& x) const {
  return autoencoder::surrogate_score(model_, x);
}

void SurrogateScore::evaluate(std::span<const Eigen::MatrixXd> points, std::vector<double>& values,
                              std::vector<Eigen::MatrixXd>& gradients) const {
  autoencoder::surrogate_with_gradients(model_, points, values, gradients);
}

double FlattenedOutputScore::value(const Eigen::MatrixXd& x) const {
  return autoencoder::flattened_reconstruction(model_, x)[static_cast<Eigen::Index>(index_)];
}

void FlattenedOutputScore::evaluate(std::span<const Eigen::MatrixXd> points,
                                    std::vector<double>& values,
                                    std::vector<Eigen::MatrixXd>& gradients) const {
  autoencoder::output_with_gradients(model_, index_, points, values, gradients);
}

std::vector<Detection> detect(const autoencoder::AutoencoderModel& ae,
                              const ocsvm::OcsvmModel& svm,
                              const std::vector<ingest::Window>& windows, ResidualMode mode,
                              const ExplainParams* explain_params) {
  const std::size_t d = mode == ResidualMode::kAggregated ? ae.num_features
                                                          : ae.num_features * ae.window_length;
  if (svm.dimension() != d) {
    throw InvalidArgument("detect: OCSVM expects dimension " + std::to_string(svm.dimension()) +
                          " but " + to_string(mode) + " residuals have dimension " +
                          std::to_string(d));
  }
  if (windows.empty()) return {};

  const auto inputs = values_of(windows);
  const auto recon = reconstruct_all(ae, inputs);

  std::unique_ptr<explain::ScoreFunction> score;
  if (explain_params) {
    if (explain_params->target == ExplainTarget::kSurrogate) {
      score = std::make_unique<SurrogateScore>(ae);
    } else {
      score = std::make_unique<FlattenedOutputScore>(ae, explain_params->output_index);
    }
  }

  std::vector<Detection> out;
  out.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    Detection det;
    det.start_index = windows[i].start_index;
    det.decision = ocsvm::decision(svm, residual_vector(inputs[i], recon[i], mode).values);
    det.verdict = ocsvm::verdict_from_decision(det.decision);
    det.score = (inputs[i] - recon[i]).squaredNorm();
    if (score && det.verdict == ocsvm::Verdict::kAnomaly) {
      det.attribution = explain::gradient_shap(*score, inputs[i], explain_params->baselines,
                                               explain_params->n_samples,
                                               mix_seed(explain_params->seed, det.start_index));
    }
    out.push_back(std::move(det));
  }
  return out;
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

Metrics metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t tn, std::size_t fn) {
  Metrics m;
  m.true_positives = tp;
  m.false_positives = fp;
  m.true_negatives = tn;
  m.false_negatives = fn;
  m.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

Metrics evaluate(const std::vector<Detection>& detections, std::span<const int> window_labels) {
  if (detections.size() != window_labels.size()) {
    throw DataError("evaluate: " + std::to_string(detections.size()) + " detections but " +
                    std::to_string(window_labels.size()) + " labels");
  }
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const bool predicted = detections[i].verdict == ocsvm::Verdict::kAnomaly;
    const bool actual = window_labels[i] != 0;
    if (predicted && actual) ++tp;
    else if (predicted) ++fp;
    else if (actual) ++fn;
    else ++tn;
  }
  return metrics_from_counts(tp, fp, tn, fn);
}

FittedPipeline fit_pipeline(const ingest::RecordTable& train, const PipelineParams& params) {
  ocsvm::validate(params.ocsvm);
  FittedPipeline fitted;
  fitted.residual_mode = params.residual_mode;
  fitted.feature_names = train.feature_names;

  const auto normal = ingest::normal_rows(train);
  if (normal.num_rows() == 0) throw DataError("training data contains no normal rows");
  fitted.scaler = ingest::fit_scaler(normal);

  const auto scaled = ingest::apply_scaler(fitted.scaler, train);
  if (params.window_length > scaled.num_rows()) {
    throw DataError("window length " + std::to_string(params.window_length) + " exceeds " +
                    std::to_string(scaled.num_rows()) + " training rows");
  }
  const auto windows = ingest::normal_windows(ingest::make_windows(scaled, params.window_length));
  if (windows.size() < 2) throw DataError("fewer than 2 attack-free training windows");
  const auto inputs = values_of(windows);

  auto model = autoencoder::init_model(train.num_features(), params.window_length,
                                       params.hidden_dim, params.latent_dim,
                                       mix_seed(params.seed, kInitStream));
  model.seed = params.seed;
  autoencoder::TrainOptions options;
  options.epochs = params.epochs;
  options.learning_rate = params.learning_rate;
  options.batch_size = params.batch_size;
  options.seed = mix_seed(params.seed, kShuffleStream);
  options.clip_norm = params.clip_norm;
  std::tie(fitted.autoencoder, fitted.history) = autoencoder::train(std::move(model), inputs, options);

  const auto recon = reconstruct_all(fitted.autoencoder, inputs);
  const std::size_t d = params.residual_mode == ResidualMode::kAggregated
                            ? train.num_features()
                            : train.num_features() * params.window_length;
  Eigen::MatrixXd residuals(static_cast<Eigen::Index>(inputs.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    residuals.row(static_cast<Eigen::Index>(i)) =
        residual_vector(inputs[i], recon[i], params.residual_mode).values.transpose();
  }
  auto svm = ocsvm::fit(residuals, params.ocsvm);
  fitted.ocsvm = std::move(svm.model);
  fitted.ocsvm_converged = svm.converged;
  fitted.ocsvm_iterations = svm.iterations;

  fitted.baselines = explain::sample_baselines(inputs, params.baseline_count,
                                               mix_seed(params.seed, kBaselineStream));
  return fitted;
}

ExplainParams explain_params_for(const FittedPipeline& fitted, const PipelineParams& params) {
  ExplainParams p;
  p.baselines = fitted.baselines;
  p.n_samples = params.explain_samples;
  p.seed = mix_seed(params.seed, kExplainStream);
  p.target = params.explain_target;
  p.output_index = params.explain_output_index;
  return p;
}

std::vector<ingest::Window> prepare_windows(const FittedPipeline& fitted,
                                            const ingest::RecordTable& table) {
  return ingest::make_windows(ingest::apply_scaler(fitted.scaler, table),
                              fitted.autoencoder.window_length);
}

std::vector<int> window_labels(const std::vector<ingest::Window>& windows) {
  std::vector<int> labels;
  labels.reserve(windows.size());
  for (const auto& w : windows) labels.push_back(w.label);
  return labels;
}

std::size_t select_window(std::span<const GridCandidate> candidates) {
  if (candidates.empty()) throw InvalidArgument("select_window: no candidates");
  const GridCandidate* best = &candidates.front();
  for (const auto& c : candidates) {
    if (c.metrics.f1 > best->metrics.f1 ||
        (c.metrics.f1 == best->metrics.f1 && c.window_size < best->window_size)) {
      best = &c;
    }
  }
  return best->window_size;
}

GridSearchReport grid_search(const ingest::RecordTable& train,
                             std::span<const std::size_t> candidate_sizes,
                             const PipelineParams& params, std::uint64_t seed) {
  if (candidate_sizes.empty()) throw InvalidArgument("grid_search: no candidate window sizes");
  for (auto l : candidate_sizes) {
    if (l < 1) throw InvalidArgument("grid_search: window sizes must be >= 1");
  }
  auto [fit_part, validation] = ingest::split_train_test(train, 0.8);

  GridSearchReport report;
  const bool has_attacks =
      validation.labels &&
      std::any_of(validation.labels->begin(), validation.labels->end(), [](int v) { return v != 0; });
  if (!has_attacks) {
    synthetic::InjectionOptions injection;
    injection.spike_share = 1.0;
    synthetic::inject_anomalies(validation, injection, mix_seed(seed, kValidationStream));
    report.synthetic_validation = true;
  }

  std::vector<std::size_t> sizes(candidate_sizes.begin(), candidate_sizes.end());
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());

  for (std::size_t idx = 0; idx < sizes.size(); ++idx) {
    const auto t0 = std::chrono::steady_clock::now();
    PipelineParams p = params;
    p.window_length = sizes[idx];
    p.seed = mix_seed(seed, 100 + idx);
    const auto fitted = fit_pipeline(fit_part, p);
    const auto windows = prepare_windows(fitted, validation);
    const auto detections = detect(fitted.autoencoder, fitted.ocsvm, windows, fitted.residual_mode);
    GridCandidate c;
    c.window_size = sizes[idx];
    c.metrics = evaluate(detections, window_labels(windows));
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.candidates.push_back(c);
  }
  report.selected = select_window(report.candidates);
  return report;
}

}  // namespace icsad::pipeline

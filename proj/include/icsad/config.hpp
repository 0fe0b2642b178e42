#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icsad/ingest.hpp"
#include "icsad/pipeline.hpp"

namespace icsad::config {

/// Fully resolved run configuration. Text form:
///
///   seed = 42
///   [dataset]
///   path = "gas.arff"
///   format = "arff"
///   [ocsvm]
///   nu = 0.05
///   gamma = "auto"
///
/// Sections: dataset, window, split, autoencoder, ocsvm, residual, explain,
/// gridsearch, output. Unknown keys are rejected.
struct RunConfig {
  std::string dataset_path;
  ingest::Format format = ingest::Format::kCsv;
  double train_fraction = 0.8;
  std::size_t window_size = 8;
  std::size_t hidden_dim = 32;
  std::size_t latent_dim = 16;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::optional<double> clip_norm;
  double nu = 0.05;
  std::optional<double> gamma;
  double tolerance = 1e-4;
  std::size_t max_iterations = 1'000'000;
  pipeline::ResidualMode residual_mode = pipeline::ResidualMode::kAggregated;
  std::size_t baselines = 100;
  std::size_t explain_samples = 200;
  pipeline::ExplainTarget explain_target = pipeline::ExplainTarget::kSurrogate;
  std::size_t explain_output_index = 0;
  std::vector<std::size_t> grid_sizes = pipeline::kDefaultWindowCandidates;
  std::uint64_t seed = 42;
  std::string output_dir;

  bool operator==(const RunConfig&) const = default;
};

/// Strict parse. Relative dataset paths resolve against `base_dir`.
/// Throws ConfigError naming the offending key.
RunConfig parse_config(std::string_view text, const std::string& base_dir = ".");

RunConfig load_config(const std::string& path);

/// Re-validates ranges after overrides (e.g. from command-line flags).
void validate(const RunConfig& config);

/// Every key, resolved, in a form parse_config reads back to an equal RunConfig.
std::string echo(const RunConfig& config);

pipeline::PipelineParams to_pipeline_params(const RunConfig& config);

}  // namespace icsad::config

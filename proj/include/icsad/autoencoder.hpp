#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace icsad::autoencoder {

/// One LSTM cell. Gate blocks are stacked row-wise in the order
/// input, forget, cell-candidate, output; each block has `hidden` rows.
struct LstmCellParams {
  Eigen::MatrixXd w_input;      // 4H x in_dim
  Eigen::MatrixXd w_recurrent;  // 4H x H
  Eigen::VectorXd bias;         // 4H
};

/// Every trainable tensor of the autoencoder. Also used as the gradient set.
struct Parameters {
  LstmCellParams encoder;        // in_dim = m
  LstmCellParams decoder;        // in_dim = latent
  Eigen::MatrixXd latent_weight; // latent x H, final encoder state -> code
  Eigen::VectorXd latent_bias;
  Eigen::MatrixXd output_weight; // m x H, decoder state -> reconstruction row
  Eigen::VectorXd output_bias;

  /// Calls fn(name, tensor) for every tensor in a fixed order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    visit(*this, fn);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    visit(*this, fn);
  }

  Parameters zeros_like() const;
  std::size_t size() const;

 private:
  template <typename Self, typename Fn>
  static void visit(Self& self, Fn& fn) {
    fn(std::string_view("encoder.w_input"), self.encoder.w_input);
    fn(std::string_view("encoder.w_recurrent"), self.encoder.w_recurrent);
    fn(std::string_view("encoder.bias"), self.encoder.bias);
    fn(std::string_view("decoder.w_input"), self.decoder.w_input);
    fn(std::string_view("decoder.w_recurrent"), self.decoder.w_recurrent);
    fn(std::string_view("decoder.bias"), self.decoder.bias);
    fn(std::string_view("latent.weight"), self.latent_weight);
    fn(std::string_view("latent.bias"), self.latent_bias);
    fn(std::string_view("output.weight"), self.output_weight);
    fn(std::string_view("output.bias"), self.output_bias);
  }
};

struct AutoencoderModel {
  std::size_t num_features = 0;   // m
  std::size_t window_length = 0;  // l
  std::size_t hidden_dim = 0;
  std::size_t latent_dim = 0;
  std::uint64_t seed = 0;
  Parameters params;
};

struct TrainingHistory {
  std::vector<double> epoch_loss;  // mean per-window MSE seen during each epoch
  std::size_t epochs_run = 0;
};

struct TrainOptions {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::optional<double> clip_norm;  // global L2 max-norm, off by default
};

/// Uniform [-1/sqrt(H), 1/sqrt(H)] weights, zero biases except forget gates at 1.
AutoencoderModel init_model(std::size_t num_features, std::size_t window_length,
                            std::size_t hidden_dim, std::size_t latent_dim,
                            std::uint64_t seed);

Eigen::MatrixXd reconstruct(const AutoencoderModel& model, const Eigen::MatrixXd& window);
std::vector<Eigen::MatrixXd> reconstruct(const AutoencoderModel& model,
                                         std::span<const Eigen::MatrixXd> windows);

/// Row-major flattening of the reconstruction (the flatten-layer view).
Eigen::VectorXd flattened_reconstruction(const AutoencoderModel& model,
                                         const Eigen::MatrixXd& window);

/// (1 / (l m)) * sum (x - x_hat)^2
double mse_loss(const Eigen::MatrixXd& window, const Eigen::MatrixXd& reconstruction);

/// Mean of mse_loss over windows.
double mean_loss(const AutoencoderModel& model, std::span<const Eigen::MatrixXd> windows);

/// Gradient of mse_loss(window, reconstruct(window)) with respect to every parameter.
Parameters parameter_gradients(const AutoencoderModel& model, const Eigen::MatrixXd& window);

/// Summed loss over the batch and its gradient (gradient of the sum, not the mean).
std::pair<double, Parameters> loss_and_gradients(const AutoencoderModel& model,
                                                 std::span<const Eigen::MatrixXd> windows);

/// Anomaly surrogate s(X) = sum (X - reconstruct(X))^2.
double surrogate_score(const AutoencoderModel& model, const Eigen::MatrixXd& window);

/// ds/dX including the dependence of the reconstruction on X.
Eigen::MatrixXd input_gradient(const AutoencoderModel& model, const Eigen::MatrixXd& window);

/// Batched surrogate values and input gradients, one entry per window.
void surrogate_with_gradients(const AutoencoderModel& model,
                              std::span<const Eigen::MatrixXd> windows,
                              std::vector<double>& scores,
                              std::vector<Eigen::MatrixXd>& gradients);

/// d(flattened_reconstruction[flat_index]) / dX for a batch of windows.
void output_with_gradients(const AutoencoderModel& model, std::size_t flat_index,
                           std::span<const Eigen::MatrixXd> windows,
                           std::vector<double>& outputs,
                           std::vector<Eigen::MatrixXd>& gradients);

/// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on mean MSE over shuffled mini-batches.
/// Throws NumericError if the loss becomes non-finite.
std::pair<AutoencoderModel, TrainingHistory> train(AutoencoderModel model,
                                                   std::span<const Eigen::MatrixXd> windows,
                                                   const TrainOptions& options);

struct ActivationRange {
  double sigmoid_min = 1.0, sigmoid_max = 0.0;
  double tanh_min = 1.0, tanh_max = -1.0;
};

/// Extremes of every gate / cell activation seen while reconstructing `window`.
ActivationRange activation_range(const AutoencoderModel& model, const Eigen::MatrixXd& window);

}  // namespace icsad::autoencoder

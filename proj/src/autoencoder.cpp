#include "icsad/autoencoder.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "icsad/error.hpp"
#include "icsad/random.hpp"

namespace icsad::autoencoder {
namespace {

using Mat = Eigen::MatrixXd;

struct CellTrace {
  std::vector<Mat> gates;  // activated, 4H x B
  std::vector<Mat> cells;
  std::vector<Mat> cell_tanh;
  std::vector<Mat> hidden;
};

struct ForwardCache {
  std::vector<Mat> inputs;  // l steps, m x B
  CellTrace encoder;
  Mat code;                 // latent x B
  CellTrace decoder;
  std::vector<Mat> outputs; // l steps, m x B
};

Mat sigmoid(const Mat& x) { return (1.0 + (-x.array()).exp()).inverse().matrix(); }

void check_window(const AutoencoderModel& model, const Mat& window) {
  if (static_cast<std::size_t>(window.rows()) != model.window_length ||
      static_cast<std::size_t>(window.cols()) != model.num_features) {
    throw InvalidArgument("window is " + std::to_string(window.rows()) + "x" +
                          std::to_string(window.cols()) + ", model expects " +
                          std::to_string(model.window_length) + "x" +
                          std::to_string(model.num_features));
  }
}

std::vector<Mat> pack(const AutoencoderModel& model, std::span<const Mat> windows) {
  const auto l = static_cast<Eigen::Index>(model.window_length);
  const auto m = static_cast<Eigen::Index>(model.num_features);
  const auto batch = static_cast<Eigen::Index>(windows.size());
  std::vector<Mat> steps(static_cast<std::size_t>(l), Mat(m, batch));
  for (Eigen::Index b = 0; b < batch; ++b) {
    const Mat& w = windows[static_cast<std::size_t>(b)];
    check_window(model, w);
    for (Eigen::Index t = 0; t < l; ++t) steps[static_cast<std::size_t>(t)].col(b) = w.row(t).transpose();
  }
  return steps;
}

Mat unpack(const std::vector<Mat>& steps, Eigen::Index b) {
  Mat out(static_cast<Eigen::Index>(steps.size()), steps.front().rows());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    out.row(static_cast<Eigen::Index>(t)) = steps[t].col(b).transpose();
  }
  return out;
}

// `input_term(t)` returns W_input * x_t (4H x B).
template <typename InputTerm>
void lstm_forward(const LstmCellParams& p, Eigen::Index hidden, Eigen::Index batch,
                  std::size_t steps, InputTerm&& input_term, CellTrace& trace) {
  const Eigen::Index H = hidden;
  Mat h = Mat::Zero(H, batch);
  Mat c = Mat::Zero(H, batch);
  for (std::size_t t = 0; t < steps; ++t) {
    Mat pre = input_term(t);
    pre.noalias() += p.w_recurrent * h;
    pre.colwise() += p.bias;
    Mat gates(4 * H, batch);
    gates.topRows(2 * H) = sigmoid(pre.topRows(2 * H));
    gates.middleRows(2 * H, H) = pre.middleRows(2 * H, H).array().tanh().matrix();
    gates.bottomRows(H) = sigmoid(pre.bottomRows(H));
    c = gates.middleRows(H, H).cwiseProduct(c) +
        gates.topRows(H).cwiseProduct(gates.middleRows(2 * H, H));
    Mat tc = c.array().tanh().matrix();
    h = gates.bottomRows(H).cwiseProduct(tc);
    trace.gates.push_back(std::move(gates));
    trace.cells.push_back(c);
    trace.cell_tanh.push_back(std::move(tc));
    trace.hidden.push_back(h);
  }
}

// Backpropagation through time for one cell. `dh_above(t)` returns a pointer to the
// gradient flowing into h_t from outside the recurrence (nullptr when none).
// Returns the pre-activation gradients per step. When `grads` is set, the
// recurrent weights and bias gradients are accumulated; input weights are left
// to the caller, who knows the inputs.
template <typename DhAbove>
std::vector<Mat> lstm_backward(const LstmCellParams& p, const CellTrace& trace,
                               DhAbove&& dh_above, LstmCellParams* grads) {
  const std::size_t steps = trace.hidden.size();
  const Eigen::Index H = p.w_recurrent.cols();
  const Eigen::Index batch = trace.hidden.front().cols();
  std::vector<Mat> dpre(steps);
  Mat dh_next = Mat::Zero(H, batch);
  Mat dc_next = Mat::Zero(H, batch);
  const Mat zero = Mat::Zero(H, batch);
  for (std::size_t s = steps; s-- > 0;) {
    Mat dh = dh_next;
    if (const Mat* above = dh_above(s)) dh += *above;
    const Mat& g = trace.gates[s];
    const auto i = g.topRows(H).array();
    const auto f = g.middleRows(H, H).array();
    const auto cand = g.middleRows(2 * H, H).array();
    const auto o = g.bottomRows(H).array();
    const auto tc = trace.cell_tanh[s].array();
    const auto c_prev = (s > 0 ? trace.cells[s - 1] : zero).array();

    const Mat dc = (dc_next.array() + dh.array() * o * (1.0 - tc.square())).matrix();
    Mat d(4 * H, batch);
    d.topRows(H) = (dc.array() * cand * i * (1.0 - i)).matrix();
    d.middleRows(H, H) = (dc.array() * c_prev * f * (1.0 - f)).matrix();
    d.middleRows(2 * H, H) = (dc.array() * i * (1.0 - cand.square())).matrix();
    d.bottomRows(H) = (dh.array() * tc * o * (1.0 - o)).matrix();

    dc_next = (dc.array() * f).matrix();
    dh_next.noalias() = p.w_recurrent.transpose() * d;
    if (grads) {
      if (s > 0) grads->w_recurrent.noalias() += d * trace.hidden[s - 1].transpose();
      grads->bias += d.rowwise().sum();
    }
    dpre[s] = std::move(d);
  }
  return dpre;
}

ForwardCache forward(const AutoencoderModel& model, std::span<const Mat> windows) {
  const auto& P = model.params;
  const auto H = static_cast<Eigen::Index>(model.hidden_dim);
  const auto batch = static_cast<Eigen::Index>(windows.size());
  const std::size_t l = model.window_length;

  ForwardCache cache;
  cache.inputs = pack(model, windows);
  lstm_forward(P.encoder, H, batch, l,
               [&](std::size_t t) -> Mat { return P.encoder.w_input * cache.inputs[t]; },
               cache.encoder);

  cache.code = P.latent_weight * cache.encoder.hidden.back();
  cache.code.colwise() += P.latent_bias;

  // The code is the decoder input at every step.
  const Mat code_term = P.decoder.w_input * cache.code;
  lstm_forward(P.decoder, H, batch, l, [&](std::size_t) -> const Mat& { return code_term; },
               cache.decoder);

  cache.outputs.reserve(l);
  for (std::size_t t = 0; t < l; ++t) {
    Mat y = P.output_weight * cache.decoder.hidden[t];
    y.colwise() += P.output_bias;
    cache.outputs.push_back(std::move(y));
  }
  return cache;
}

// Pushes dL/dY (per step, m x B) back through the network.
void backward(const AutoencoderModel& model, const ForwardCache& cache,
              const std::vector<Mat>& d_outputs, Parameters* grads, std::vector<Mat>* d_inputs) {
  const auto& P = model.params;
  const std::size_t l = model.window_length;

  std::vector<Mat> dh_decoder(l);
  for (std::size_t t = 0; t < l; ++t) {
    dh_decoder[t].noalias() = P.output_weight.transpose() * d_outputs[t];
    if (grads) {
      grads->output_weight.noalias() += d_outputs[t] * cache.decoder.hidden[t].transpose();
      grads->output_bias += d_outputs[t].rowwise().sum();
    }
  }

  const auto dpre_dec = lstm_backward(
      P.decoder, cache.decoder, [&](std::size_t t) { return &dh_decoder[t]; },
      grads ? &grads->decoder : nullptr);
  Mat dpre_sum = dpre_dec.front();
  for (std::size_t t = 1; t < l; ++t) dpre_sum += dpre_dec[t];
  const Mat d_code = P.decoder.w_input.transpose() * dpre_sum;
  if (grads) {
    grads->decoder.w_input.noalias() += dpre_sum * cache.code.transpose();
    grads->latent_weight.noalias() += d_code * cache.encoder.hidden.back().transpose();
    grads->latent_bias += d_code.rowwise().sum();
  }

  const Mat dh_final = P.latent_weight.transpose() * d_code;
  const auto dpre_enc = lstm_backward(
      P.encoder, cache.encoder,
      [&](std::size_t t) -> const Mat* { return t + 1 == l ? &dh_final : nullptr; },
      grads ? &grads->encoder : nullptr);
  if (grads) {
    for (std::size_t t = 0; t < l; ++t) {
      grads->encoder.w_input.noalias() += dpre_enc[t] * cache.inputs[t].transpose();
    }
  }
  if (d_inputs) {
    d_inputs->resize(l);
    for (std::size_t t = 0; t < l; ++t) {
      (*d_inputs)[t].noalias() = P.encoder.w_input.transpose() * dpre_enc[t];
    }
  }
}

LstmCellParams zero_cell(const LstmCellParams& p) {
  return {Mat::Zero(p.w_input.rows(), p.w_input.cols()),
          Mat::Zero(p.w_recurrent.rows(), p.w_recurrent.cols()),
          Eigen::VectorXd::Zero(p.bias.size())};
}

// Flat views of every tensor, in for_each order.
std::vector<std::pair<double*, Eigen::Index>> flat_views(Parameters& p) {
  std::vector<std::pair<double*, Eigen::Index>> views;
  p.for_each([&](std::string_view, auto& t) { views.emplace_back(t.data(), t.size()); });
  return views;
}

}  // namespace

Parameters Parameters::zeros_like() const {
  Parameters z;
  z.encoder = zero_cell(encoder);
  z.decoder = zero_cell(decoder);
  z.latent_weight = Mat::Zero(latent_weight.rows(), latent_weight.cols());
  z.latent_bias = Eigen::VectorXd::Zero(latent_bias.size());
  z.output_weight = Mat::Zero(output_weight.rows(), output_weight.cols());
  z.output_bias = Eigen::VectorXd::Zero(output_bias.size());
  return z;
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for_each([&](std::string_view, const auto& t) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

AutoencoderModel init_model(std::size_t num_features, std::size_t window_length,
                            std::size_t hidden_dim, std::size_t latent_dim,
                            std::uint64_t seed) {
  if (num_features < 1 || window_length < 1 || hidden_dim < 1 || latent_dim < 1) {
    throw InvalidArgument("autoencoder dimensions must all be >= 1");
  }
  const auto m = static_cast<Eigen::Index>(num_features);
  const auto H = static_cast<Eigen::Index>(hidden_dim);
  const auto z = static_cast<Eigen::Index>(latent_dim);

  AutoencoderModel model;
  model.num_features = num_features;
  model.window_length = window_length;
  model.hidden_dim = hidden_dim;
  model.latent_dim = latent_dim;
  model.seed = seed;

  auto& P = model.params;
  P.encoder = {Mat(4 * H, m), Mat(4 * H, H), Eigen::VectorXd::Zero(4 * H)};
  P.decoder = {Mat(4 * H, z), Mat(4 * H, H), Eigen::VectorXd::Zero(4 * H)};
  P.latent_weight = Mat(z, H);
  P.latent_bias = Eigen::VectorXd::Zero(z);
  P.output_weight = Mat(m, H);
  P.output_bias = Eigen::VectorXd::Zero(m);

  Rng rng(seed);
  const double s = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  P.for_each([&](std::string_view name, auto& t) {
    if (name.find("bias") != std::string_view::npos) return;
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.uniform(-s, s);
  });
  P.encoder.bias.segment(H, H).setOnes();
  P.decoder.bias.segment(H, H).setOnes();
  return model;
}

std::vector<Mat> reconstruct(const AutoencoderModel& model, std::span<const Mat> windows) {
  if (windows.empty()) return {};
  const auto cache = forward(model, windows);
  std::vector<Mat> out;
  out.reserve(windows.size());
  for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(windows.size()); ++b) {
    out.push_back(unpack(cache.outputs, b));
  }
  return out;
}

Mat reconstruct(const AutoencoderModel& model, const Mat& window) {
  return reconstruct(model, std::span<const Mat>(&window, 1)).front();
}

Eigen::VectorXd flattened_reconstruction(const AutoencoderModel& model, const Mat& window) {
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r =
      reconstruct(model, window);
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

double mse_loss(const Mat& window, const Mat& reconstruction) {
  if (window.rows() != reconstruction.rows() || window.cols() != reconstruction.cols()) {
    throw InvalidArgument("mse_loss: shape mismatch");
  }
  if (window.size() == 0) throw InvalidArgument("mse_loss: empty matrices");
  return (window - reconstruction).squaredNorm() / static_cast<double>(window.size());
}

double mean_loss(const AutoencoderModel& model, std::span<const Mat> windows) {
  if (windows.empty()) throw InvalidArgument("mean_loss: no windows");
  const auto recon = reconstruct(model, windows);
  double total = 0.0;
  for (std::size_t i = 0; i < windows.size(); ++i) total += mse_loss(windows[i], recon[i]);
  return total / static_cast<double>(windows.size());
}

std::pair<double, Parameters> loss_and_gradients(const AutoencoderModel& model,
                                                 std::span<const Mat> windows) {
  if (windows.empty()) throw InvalidArgument("loss_and_gradients: no windows");
  const auto cache = forward(model, windows);
  const double scale = 2.0 / static_cast<double>(model.window_length * model.num_features);
  double loss = 0.0;
  std::vector<Mat> d_outputs(model.window_length);
  for (std::size_t t = 0; t < model.window_length; ++t) {
    const Mat diff = cache.outputs[t] - cache.inputs[t];
    loss += diff.squaredNorm();
    d_outputs[t] = scale * diff;
  }
  loss /= static_cast<double>(model.window_length * model.num_features);
  Parameters grads = model.params.zeros_like();
  backward(model, cache, d_outputs, &grads, nullptr);
  return {loss, std::move(grads)};
}

Parameters parameter_gradients(const AutoencoderModel& model, const Mat& window) {
  return loss_and_gradients(model, std::span<const Mat>(&window, 1)).second;
}

void surrogate_with_gradients(const AutoencoderModel& model, std::span<const Mat> windows,
                              std::vector<double>& scores, std::vector<Mat>& gradients) {
  scores.assign(windows.size(), 0.0);
  gradients.assign(windows.size(), Mat());
  if (windows.empty()) return;
  const auto cache = forward(model, windows);
  const std::size_t l = model.window_length;
  // s = sum (X - Y)^2  =>  ds/dY = -2 (X - Y), plus the direct term 2 (X - Y).
  std::vector<Mat> residual(l), d_outputs(l);
  for (std::size_t t = 0; t < l; ++t) {
    residual[t] = cache.inputs[t] - cache.outputs[t];
    d_outputs[t] = -2.0 * residual[t];
  }
  std::vector<Mat> d_inputs;
  backward(model, cache, d_outputs, nullptr, &d_inputs);
  for (std::size_t t = 0; t < l; ++t) d_inputs[t] += 2.0 * residual[t];
  for (Eigen::Index b = 0; b < static_cast<Eigen::Index>(windows.size()); ++b) {
    double s = 0.0;
    for (std::size_t t = 0; t < l; ++t) s += residual[t].col(b).squaredNorm();
    scores[static_cast<std::size_t>(b)] = s;
    gradients[static_cast<std::size_t>(b)] = unpack(d_inputs, b);
  }
}

double surrogate_score(const AutoencoderModel& model, const Mat& window) {
  check_window(model, window);
  return (window - reconstruct(model, window)).squaredNorm();
}

Mat input_gradient(const AutoencoderModel& model, const Mat& window) {
  std::vector<double> scores;
  std::vector<Mat> grads;
  surrogate_with_gradients(model, std::span<const Mat>(&window, 1), scores, grads);
  return grads.front();
}

void output_with_gradients(const AutoencoderModel& model, std::size_t flat_index,
                           std::span<const Mat> windows, std::vector<double>& outputs,
                           std::vector<Mat>& gradients) {
  const std::size_t m = model.num_features;
  if (flat_index >= model.window_length * m) {
    throw InvalidArgument("flattened output index out of range");
  }
  outputs.assign(windows.size(), 0.0);
  gradients.assign(windows.size(), Mat());
  if (windows.empty()) return;
  const auto cache = forward(model, windows);
  const auto step = flat_index / m;
  const auto feature = static_cast<Eigen::Index>(flat_index % m);
  const auto batch = static_cast<Eigen::Index>(windows.size());
  std::vector<Mat> d_outputs(model.window_length,
                             Mat::Zero(static_cast<Eigen::Index>(m), batch));
  d_outputs[step].row(feature).setOnes();
  std::vector<Mat> d_inputs;
  backward(model, cache, d_outputs, nullptr, &d_inputs);
  for (Eigen::Index b = 0; b < batch; ++b) {
    outputs[static_cast<std::size_t>(b)] = cache.outputs[step](feature, b);
    gradients[static_cast<std::size_t>(b)] = unpack(d_inputs, b);
  }
}

std::pair<AutoencoderModel, TrainingHistory> train(AutoencoderModel model,
                                                   std::span<const Mat> windows,
                                                   const TrainOptions& options) {
  if (windows.empty()) throw InvalidArgument("train: no windows");
  if (options.batch_size < 1) throw InvalidArgument("train: batch_size must be >= 1");
  if (!(options.learning_rate > 0.0)) throw InvalidArgument("train: learning_rate must be > 0");
  for (const auto& w : windows) check_window(model, w);

  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  TrainingHistory history;
  Parameters first_moment = model.params.zeros_like();
  Parameters second_moment = model.params.zeros_like();
  auto params = flat_views(model.params);
  auto m1 = flat_views(first_moment);
  auto m2 = flat_views(second_moment);

  Rng rng(options.seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Mat> batch;
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double epoch_total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
      const std::size_t end = std::min(order.size(), begin + options.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) batch.push_back(windows[order[k]]);

      auto [loss, grads] = loss_and_gradients(model, batch);
      if (!std::isfinite(loss)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch));
      }
      epoch_total += loss;

      const double inv_batch = 1.0 / static_cast<double>(batch.size());
      auto g = flat_views(grads);
      double norm_sq = 0.0;
      for (auto& [ptr, n] : g) {
        auto v = Eigen::Map<Eigen::VectorXd>(ptr, n);
        v *= inv_batch;
        norm_sq += v.squaredNorm();
      }
      double clip = 1.0;
      if (options.clip_norm && std::sqrt(norm_sq) > *options.clip_norm) {
        clip = *options.clip_norm / std::sqrt(norm_sq);
      }

      ++step;
      const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      const double lr = options.learning_rate;
      for (std::size_t k = 0; k < params.size(); ++k) {
        auto w = Eigen::Map<Eigen::ArrayXd>(params[k].first, params[k].second);
        auto a = Eigen::Map<Eigen::ArrayXd>(m1[k].first, m1[k].second);
        auto b = Eigen::Map<Eigen::ArrayXd>(m2[k].first, m2[k].second);
        const auto gk = Eigen::Map<const Eigen::ArrayXd>(g[k].first, g[k].second) * clip;
        a = kBeta1 * a + (1.0 - kBeta1) * gk;
        b = kBeta2 * b + (1.0 - kBeta2) * gk.square();
        w -= lr * (a / c1) / ((b / c2).sqrt() + kEps);
      }
    }
    history.epoch_loss.push_back(epoch_total / static_cast<double>(windows.size()));
    ++history.epochs_run;
  }
  return {std::move(model), std::move(history)};
}

ActivationRange activation_range(const AutoencoderModel& model, const Mat& window) {
  const auto cache = forward(model, std::span<const Mat>(&window, 1));
  const auto H = static_cast<Eigen::Index>(model.hidden_dim);
  ActivationRange r;
  auto visit = [&](const CellTrace& trace) {
    for (std::size_t t = 0; t < trace.gates.size(); ++t) {
      const Mat& g = trace.gates[t];
      for (const Mat& sig : {Mat(g.topRows(2 * H)), Mat(g.bottomRows(H))}) {
        r.sigmoid_min = std::min(r.sigmoid_min, sig.minCoeff());
        r.sigmoid_max = std::max(r.sigmoid_max, sig.maxCoeff());
      }
      for (const Mat& th : {Mat(g.middleRows(2 * H, H)), trace.cell_tanh[t]}) {
        r.tanh_min = std::min(r.tanh_min, th.minCoeff());
        r.tanh_max = std::max(r.tanh_max, th.maxCoeff());
      }
    }
  };
  visit(cache.encoder);
  visit(cache.decoder);
  return r;
}

}  // namespace icsad::autoencoder

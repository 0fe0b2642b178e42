#include "icsad/explain.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <string>

#include "icsad/error.hpp"
#include "icsad/random.hpp"

namespace icsad::explain {
namespace {

constexpr std::size_t kGradientChunk = 256;

void check_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InvalidArgument(std::string(what) + ": shape mismatch");
  }
}

}  // namespace

int CoalitionVector::count() const { return std::popcount(bits_); }

std::vector<double> exact_shapley(const ShapleyGame& game) {
  const int M = game.players;
  if (M < 1) throw InvalidArgument("exact_shapley: need at least one player");
  if (M > kMaxExactPlayers) {
    throw InvalidArgument("exact_shapley: " + std::to_string(M) + " players exceeds the limit of " +
                          std::to_string(kMaxExactPlayers));
  }
  if (!game.value) throw InvalidArgument("exact_shapley: game has no value function");

  const std::uint32_t full = (1U << M) - 1U;
  std::vector<double> v(static_cast<std::size_t>(full) + 1);
  for (std::uint32_t s = 0; s <= full; ++s) v[s] = game.value(CoalitionVector(s, M));

  // |S|! (M - |S| - 1)! / M!  ==  1 / (M * C(M - 1, |S|))
  std::vector<double> weight(static_cast<std::size_t>(M));
  double binom = 1.0;
  for (int s = 0; s < M; ++s) {
    weight[static_cast<std::size_t>(s)] = 1.0 / (static_cast<double>(M) * binom);
    binom = binom * static_cast<double>(M - 1 - s) / static_cast<double>(s + 1);
  }

  std::vector<double> phi(static_cast<std::size_t>(M), 0.0);
  for (int k = 0; k < M; ++k) {
    const std::uint32_t bit = 1U << k;
    double total = 0.0;
    for (std::uint32_t s = 0; s <= full; ++s) {
      if (s & bit) continue;
      total += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    }
    phi[static_cast<std::size_t>(k)] = total;
  }
  return phi;
}

double explanation_model(double phi0, std::span<const double> phi, const CoalitionVector& z) {
  if (static_cast<int>(phi.size()) != z.players()) {
    throw InvalidArgument("explanation_model: coalition size does not match attributions");
  }
  double g = phi0;
  for (int k = 0; k < z.players(); ++k) {
    if (z.contains(k)) g += phi[static_cast<std::size_t>(k)];
  }
  return g;
}

void LambdaScore::evaluate(std::span<const Eigen::MatrixXd> points, std::vector<double>& values,
                           std::vector<Eigen::MatrixXd>& gradients) const {
  values.resize(points.size());
  gradients.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    values[i] = value_(points[i]);
    gradients[i] = gradient_(points[i]);
  }
}

AttributionMatrix gradient_shap(const ScoreFunction& score, const Eigen::MatrixXd& x,
                                const BaselineSet& baselines, std::size_t n_samples,
                                std::uint64_t seed) {
  if (baselines.windows.empty()) throw InvalidArgument("gradient_shap: empty baseline set");
  if (n_samples < 1) throw InvalidArgument("gradient_shap: n_samples must be >= 1");
  for (const auto& b : baselines.windows) check_shape(x, b, "gradient_shap");

  AttributionMatrix out;
  out.values = Eigen::MatrixXd::Zero(x.rows(), x.cols());
  out.explained_score = score.value(x);
  double baseline_total = 0.0;
  for (const auto& b : baselines.windows) baseline_total += score.value(b);
  out.baseline_expectation = baseline_total / static_cast<double>(baselines.size());

  Rng rng(seed);
  std::vector<std::size_t> picks;
  std::vector<Eigen::MatrixXd> points;
  std::vector<double> values;
  std::vector<Eigen::MatrixXd> gradients;
  for (std::size_t done = 0; done < n_samples;) {
    const std::size_t chunk = std::min(kGradientChunk, n_samples - done);
    picks.clear();
    points.clear();
    for (std::size_t s = 0; s < chunk; ++s) {
      const auto b = static_cast<std::size_t>(rng.below(baselines.size()));
      const double a = rng.uniform_open();
      const auto& base = baselines.windows[b];
      picks.push_back(b);
      points.push_back(base + a * (x - base));
    }
    score.evaluate(points, values, gradients);
    for (std::size_t s = 0; s < chunk; ++s) {
      out.values += (x - baselines.windows[picks[s]]).cwiseProduct(gradients[s]);
    }
    done += chunk;
  }
  out.values /= static_cast<double>(n_samples);
  return out;
}

ShapleyGame make_game_from_model(const ScoreFunction& score, const Eigen::MatrixXd& x,
                                 const BaselineSet& baselines) {
  if (baselines.windows.empty()) throw InvalidArgument("make_game_from_model: empty baseline set");
  for (const auto& b : baselines.windows) check_shape(x, b, "make_game_from_model");
  const auto cells = x.size();
  if (cells > 32) throw InvalidArgument("make_game_from_model: more than 32 cells");

  ShapleyGame game;
  game.players = static_cast<int>(cells);
  // Captures by value so the game outlives the call site's temporaries, except
  // for the score function itself.
  game.value = [&score, x, windows = baselines.windows](const CoalitionVector& s) {
    const auto cols = x.cols();
    double total = 0.0;
    for (const auto& b : windows) {
      Eigen::MatrixXd mixed = b;
      for (Eigen::Index cell = 0; cell < x.size(); ++cell) {
        if (s.contains(static_cast<int>(cell))) mixed(cell / cols, cell % cols) = x(cell / cols, cell % cols);
      }
      total += score.value(mixed);
    }
    return total / static_cast<double>(windows.size());
  };
  return game;
}

FeatureSummary aggregate_per_feature(const AttributionMatrix& attr) {
  const auto& a = attr.values;
  FeatureSummary out;
  out.signed_sum = a.colwise().sum().transpose();
  out.mean_abs = a.rows() > 0
                     ? Eigen::VectorXd(a.cwiseAbs().colwise().sum().transpose() /
                                       static_cast<double>(a.rows()))
                     : Eigen::VectorXd::Zero(a.cols());
  out.ranking.resize(static_cast<std::size_t>(a.cols()));
  std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t p, std::size_t q) {
    return out.mean_abs[static_cast<Eigen::Index>(p)] > out.mean_abs[static_cast<Eigen::Index>(q)];
  });
  return out;
}

BaselineSet sample_baselines(std::span<const Eigen::MatrixXd> candidates, std::size_t count,
                             std::uint64_t seed) {
  if (candidates.empty()) throw InvalidArgument("sample_baselines: no candidate windows");
  std::vector<std::size_t> idx(candidates.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(std::min(count, idx.size()));
  std::sort(idx.begin(), idx.end());
  BaselineSet set;
  for (auto i : idx) set.windows.push_back(candidates[i]);
  return set;
}

}  // namespace icsad::explain

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace icsad::explain {

/// Presence bits z' over M players; bit k set means player k is in the coalition.
class CoalitionVector {
 public:
  CoalitionVector(std::uint32_t bits, int players) : bits_(bits), players_(players) {}

  bool contains(int k) const { return (bits_ >> k) & 1U; }
  int count() const;
  int players() const { return players_; }
  std::uint32_t bits() const { return bits_; }

 private:
  std::uint32_t bits_;
  int players_;
};

/// Cooperative game with M players and a value for every coalition.
struct ShapleyGame {
  int players = 0;
  std::function<double(const CoalitionVector&)> value;
};

inline constexpr int kMaxExactPlayers = 20;

/// Exact Shapley values by enumerating all 2^M coalitions. Refuses M > 20.
std::vector<double> exact_shapley(const ShapleyGame& game);

/// Additive explanation model g(z') = phi0 + sum_k phi_k z'_k.
double explanation_model(double phi0, std::span<const double> phi, const CoalitionVector& z);

/// A differentiable scalar over l x m windows.
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;
  virtual double value(const Eigen::MatrixXd& x) const = 0;
  /// Values and gradients for a batch of points.
  virtual void evaluate(std::span<const Eigen::MatrixXd> points, std::vector<double>& values,
                        std::vector<Eigen::MatrixXd>& gradients) const = 0;
};

/// ScoreFunction from two callables; handy for closed-form scores.
class LambdaScore final : public ScoreFunction {
 public:
  using Value = std::function<double(const Eigen::MatrixXd&)>;
  using Gradient = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

  LambdaScore(Value value, Gradient gradient)
      : value_(std::move(value)), gradient_(std::move(gradient)) {}

  double value(const Eigen::MatrixXd& x) const override { return value_(x); }
  void evaluate(std::span<const Eigen::MatrixXd> points, std::vector<double>& values,
                std::vector<Eigen::MatrixXd>& gradients) const override;

 private:
  Value value_;
  Gradient gradient_;
};

/// Background windows drawn from normal training data.
struct BaselineSet {
  std::vector<Eigen::MatrixXd> windows;

  std::size_t size() const { return windows.size(); }
};

struct AttributionMatrix {
  Eigen::MatrixXd values;            // l x m, signed contributions
  double baseline_expectation = 0.0; // mean score over the baseline set (phi0)
  double explained_score = 0.0;      // score of the explained window
};

/// Expected-gradients estimator: mean over n_samples draws of (x - b) * grad(b + a (x - b)),
/// with b uniform over the baselines and a uniform on (0, 1).
AttributionMatrix gradient_shap(const ScoreFunction& score, const Eigen::MatrixXd& x,
                                const BaselineSet& baselines, std::size_t n_samples,
                                std::uint64_t seed);

/// Game over the l*m cells (row-major): v(S) = mean over baselines of the score
/// of x with every cell outside S replaced by the baseline's cell.
ShapleyGame make_game_from_model(const ScoreFunction& score, const Eigen::MatrixXd& x,
                                 const BaselineSet& baselines);

struct FeatureSummary {
  Eigen::VectorXd signed_sum;      // sum over time steps
  Eigen::VectorXd mean_abs;        // mean |attribution| over time steps
  std::vector<std::size_t> ranking;  // feature indices, most important first
};

/// Per-feature aggregation; ties in importance keep index order.
FeatureSummary aggregate_per_feature(const AttributionMatrix& attr);

/// Draws `count` windows uniformly without replacement (all when count >= size).
BaselineSet sample_baselines(std::span<const Eigen::MatrixXd> candidates, std::size_t count,
                             std::uint64_t seed);

}  // namespace icsad::explain

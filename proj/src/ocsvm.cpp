#include "icsad/ocsvm.hpp"

#include <cmath>
#include <limits>
#include <list>
#include <string>
#include <vector>

#include "icsad/error.hpp"

namespace icsad::ocsvm {
namespace {

// Gram rows on demand. Small problems keep the whole matrix; larger ones an
// LRU cache bounded by kCacheBytes.
class KernelRows {
 public:
  static constexpr std::size_t kFullLimit = 3000;
  static constexpr std::size_t kCacheBytes = std::size_t{256} << 20;

  KernelRows(const Eigen::MatrixXd& x, double gamma)
      : x_(x), gamma_(gamma), n_(static_cast<std::size_t>(x.rows())), sq_norms_(x.rowwise().squaredNorm()) {
    if (n_ <= kFullLimit) {
      full_.resize(x.rows(), x.rows());
      for (Eigen::Index i = 0; i < x.rows(); ++i) full_.row(i) = compute(i).transpose();
    } else {
      capacity_ = std::max<std::size_t>(2, kCacheBytes / (n_ * sizeof(double)));
      slots_.assign(n_, lru_.end());
    }
  }

  const double* row(std::size_t i) {
    if (full_.size() > 0) return full_.data() + i * n_;  // symmetric, column i == row i
    if (slots_[i] != lru_.end()) {
      lru_.splice(lru_.begin(), lru_, slots_[i]);
      return lru_.front().values.data();
    }
    if (lru_.size() >= capacity_) {
      slots_[lru_.back().index] = lru_.end();
      lru_.pop_back();
    }
    lru_.push_front({i, compute(static_cast<Eigen::Index>(i))});
    slots_[i] = lru_.begin();
    return lru_.front().values.data();
  }

 private:
  struct Entry {
    std::size_t index;
    Eigen::VectorXd values;
  };

  Eigen::VectorXd compute(Eigen::Index i) const {
    Eigen::VectorXd d2 = sq_norms_.array() + sq_norms_[i];
    d2.noalias() -= 2.0 * (x_ * x_.row(i).transpose());
    Eigen::VectorXd k = (-gamma_ * d2.array().max(0.0)).exp();
    k[i] = 1.0;
    return k;
  }

  const Eigen::MatrixXd& x_;
  double gamma_;
  std::size_t n_;
  Eigen::VectorXd sq_norms_;
  Eigen::MatrixXd full_;
  std::size_t capacity_ = 0;
  std::list<Entry> lru_;
  std::vector<std::list<Entry>::iterator> slots_;
};

bool all_rows_identical(const Eigen::MatrixXd& x) {
  for (Eigen::Index i = 1; i < x.rows(); ++i) {
    if (x.row(i) != x.row(0)) return false;
  }
  return true;
}

}  // namespace

void validate(const OcsvmConfig& config) {
  if (!(config.nu > 0.0 && config.nu <= 1.0)) throw InvalidArgument("nu must lie in (0, 1]");
  if (config.gamma && !(*config.gamma > 0.0)) throw InvalidArgument("gamma must be > 0");
  if (!(config.tolerance > 0.0)) throw InvalidArgument("tolerance must be > 0");
  if (config.max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
}

double rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y, double gamma) {
  if (x.size() != y.size()) throw InvalidArgument("rbf_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw InvalidArgument("rbf_kernel: gamma must be > 0");
  return std::exp(-gamma * (x - y).squaredNorm());
}

FitResult fit(const Eigen::MatrixXd& residuals, const OcsvmConfig& config) {
  validate(config);
  const auto n = static_cast<std::size_t>(residuals.rows());
  if (n < 2) throw InvalidArgument("ocsvm fit needs at least 2 training points");
  if (residuals.cols() < 1) throw InvalidArgument("ocsvm fit needs d >= 1");
  if (!residuals.allFinite()) throw NumericError("ocsvm fit: non-finite residuals");

  const double gamma = config.gamma.value_or(1.0 / static_cast<double>(residuals.cols()));
  const double upper = 1.0 / (config.nu * static_cast<double>(n));

  FitResult result;
  result.model.gamma = gamma;
  Eigen::VectorXd alpha = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n),
                                                    1.0 / static_cast<double>(n));

  if (all_rows_identical(residuals)) {
    // Every expansion equals 1; a single merged support vector with rho = 1
    // puts every training point exactly on the boundary (normal by the tie rule).
    result.training_alpha = alpha;
    result.model.support_vectors = residuals.topRows(1);
    result.model.alpha = Eigen::VectorXd::Ones(1);
    result.model.rho = 1.0;
    result.objective = 0.5;
    result.converged = true;
    return result;
  }

  KernelRows kernel(residuals, gamma);
  // Gradient of 0.5 a'Ka is Ka.
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double* k = kernel.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += k[j] * alpha[static_cast<Eigen::Index>(j)];
    grad[static_cast<Eigen::Index>(i)] = s;
  }

  std::size_t iter = 0;
  double violation = 0.0;
  for (;;) {
    // i: can grow, smallest gradient. j: can shrink, largest gradient.
    std::size_t up = n, low = n;
    double g_up = std::numeric_limits<double>::infinity();
    double g_low = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      if (alpha[kk] < upper && grad[kk] < g_up) {
        g_up = grad[kk];
        up = k;
      }
      if (alpha[kk] > 0.0 && grad[kk] > g_low) {
        g_low = grad[kk];
        low = k;
      }
    }
    violation = (up == n || low == n) ? 0.0 : g_low - g_up;
    if (violation <= config.tolerance) {
      result.converged = true;
      break;
    }
    if (iter >= config.max_iterations) break;
    ++iter;

    const double* k_up = kernel.row(up);
    const double* k_low = kernel.row(low);
    const double curvature = std::max(2.0 - 2.0 * k_up[low], 1e-12);
    const auto iu = static_cast<Eigen::Index>(up);
    const auto il = static_cast<Eigen::Index>(low);
    double delta = violation / curvature;
    double new_up = alpha[iu] + delta;
    double new_low = alpha[il] - delta;
    if (delta >= upper - alpha[iu]) {
      delta = upper - alpha[iu];
      new_up = upper;
      new_low = alpha[il] - delta;
    }
    if (delta >= alpha[il]) {
      delta = alpha[il];
      new_low = 0.0;
      new_up = alpha[iu] + delta;
      if (new_up > upper) new_up = upper;
    }
    alpha[iu] = new_up;
    alpha[il] = new_low;
    for (std::size_t k = 0; k < n; ++k) {
      grad[static_cast<Eigen::Index>(k)] += delta * (k_up[k] - k_low[k]);
    }
  }

  result.iterations = iter;
  result.max_violation = violation;
  result.training_alpha = alpha;
  result.objective = 0.5 * alpha.dot(grad);

  // rho: mean expansion over margin SVs; otherwise the midpoint of the feasible
  // interval given by points at the bounds.
  double margin_sum = 0.0;
  std::size_t margin_count = 0;
  double at_upper_max = -std::numeric_limits<double>::infinity();
  double at_zero_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    if (alpha[kk] > 0.0 && alpha[kk] < upper) {
      margin_sum += grad[kk];
      ++margin_count;
    } else if (alpha[kk] >= upper) {
      at_upper_max = std::max(at_upper_max, grad[kk]);
    } else {
      at_zero_min = std::min(at_zero_min, grad[kk]);
    }
  }
  double rho;
  if (margin_count > 0) {
    rho = margin_sum / static_cast<double>(margin_count);
  } else if (std::isfinite(at_upper_max) && std::isfinite(at_zero_min)) {
    rho = 0.5 * (at_upper_max + at_zero_min);
  } else {
    rho = std::isfinite(at_upper_max) ? at_upper_max : at_zero_min;
  }
  result.model.rho = rho;

  std::vector<Eigen::Index> kept;
  for (Eigen::Index k = 0; k < alpha.size(); ++k) {
    if (alpha[k] > 0.0) kept.push_back(k);
  }
  result.model.support_vectors = residuals(kept, Eigen::all);
  result.model.alpha = alpha(kept);
  return result;
}

double decision(const OcsvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& residual) {
  if (static_cast<std::size_t>(residual.size()) != model.dimension()) {
    throw InvalidArgument("decision: residual has dimension " + std::to_string(residual.size()) +
                          ", model expects " + std::to_string(model.dimension()));
  }
  double s = 0.0;
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i) {
    s += model.alpha[i] *
         std::exp(-model.gamma * (model.support_vectors.row(i).transpose() - residual).squaredNorm());
  }
  return s - model.rho;
}

Verdict verdict_from_decision(double decision_value) {
  return decision_value < 0.0 ? Verdict::kAnomaly : Verdict::kNormal;
}

Verdict predict(const OcsvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& residual) {
  return verdict_from_decision(decision(model, residual));
}

const char* to_string(Verdict v) { return v == Verdict::kAnomaly ? "anomaly" : "normal"; }

}  // namespace icsad::ocsvm

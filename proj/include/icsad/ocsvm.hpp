#pragma once

#include <cstddef>
#include <optional>

#include <Eigen/Dense>

namespace icsad::ocsvm {

struct OcsvmConfig {
  double nu = 0.05;
  std::optional<double> gamma;  // unset: 1 / d
  double tolerance = 1e-4;      // maximal KKT violation at which SMO stops
  std::size_t max_iterations = 1'000'000;
};

/// nu-one-class SVM in the normalisation sum(alpha) = 1, 0 <= alpha <= 1 / (nu n).
struct OcsvmModel {
  Eigen::MatrixXd support_vectors;  // k x d, rows with alpha > 0
  Eigen::VectorXd alpha;            // k
  double rho = 0.0;
  double gamma = 1.0;

  std::size_t dimension() const { return static_cast<std::size_t>(support_vectors.cols()); }
};

struct FitResult {
  OcsvmModel model;
  Eigen::VectorXd training_alpha;  // n, including zeros
  double objective = 0.0;          // 0.5 alpha' K alpha
  double max_violation = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

enum class Verdict { kNormal, kAnomaly };

/// exp(-gamma ||x - y||^2)
double rbf_kernel(const Eigen::Ref<const Eigen::VectorXd>& x,
                  const Eigen::Ref<const Eigen::VectorXd>& y, double gamma);

/// SMO with maximal-violating-pair selection. Starts from the uniform point
/// alpha_i = 1/n, so the trajectory does not depend on row order.
/// Non-convergence within max_iterations is reported via `converged`, not thrown.
FitResult fit(const Eigen::MatrixXd& residuals, const OcsvmConfig& config);

/// sum_i alpha_i K(sv_i, x) - rho. Positive means inside the normal region.
double decision(const OcsvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& residual);

/// Anomaly iff decision < 0.
Verdict verdict_from_decision(double decision_value);
Verdict predict(const OcsvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& residual);

const char* to_string(Verdict v);

void validate(const OcsvmConfig& config);

}  // namespace icsad::ocsvm

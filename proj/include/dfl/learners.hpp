#pragma once

#include <Eigen/Dense>
#include <string>

#include "dfl/hypothesis.hpp"

namespace dfl {

enum class ModelKind {
  dfrr,
  dfkrr,
  dfgr,
  dfpca_ridge,
  baseline_ridge,
  baseline_logistic,
  baseline_pca_ridge,
};

std::string model_kind_name(ModelKind kind);

/// A fitted combination f = sum_t alpha_t h_{r_t}. For linear kinds, basis
/// is the p×k matrix whose columns are the selected hypotheses; for dfkrr,
/// basis is the n×k coefficient matrix over the training points, which are
/// kept for prediction-time kernel evaluation.
struct FairModel {
  ModelKind kind = ModelKind::dfrr;
  Eigen::VectorXd alpha;
  Eigen::MatrixXd basis;
  double lambda = 0.0;
  KernelSpec kernel;        // dfkrr only
  Eigen::MatrixXd train_x;  // dfkrr only
  bool converged = true;    // Newton-based kinds
  bool jitter_applied = false;
};

/// Generalized eigenvectors of the pair (H^T Sigma_x H, H^T H): the fair
/// principal directions expressed in hypothesis coordinates.
struct PcaSubspace {
  Eigen::MatrixXd coeff_vectors;  // k×q, column j is alpha_j
  Eigen::VectorXd eigenvalues;    // length q, descending
  Eigen::MatrixXd basis;          // the H used
  bool jitter_applied = false;
};

struct NewtonOptions {
  int max_iter = 100;
  double tol = 1e-8;   // stop when the max-norm of the gradient drops below
  double step = 1.0;   // initial step, halved while the objective increases
};

/// Ridge regression in the fair hypothesis space:
/// alpha = (H^T X^T X H + lambda I)^{-1} H^T X^T Y, solved by factorization
/// with iterative refinement; residual kept under 1e-8 * (1 + |rhs|).
/// lambda = 0 with a rank-deficient system raises SingularSystemError.
FairModel dfrr_fit(const Eigen::MatrixXd& h, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y, double lambda);

/// Kernel ridge in the fair hypothesis space: alpha solves the normal
/// equations of min |(K + lambda I) C alpha - Y|. Prediction on z uses
/// coefficients c~ = C alpha over the training points.
FairModel dfkrr_fit(const Eigen::MatrixXd& gram, const Eigen::MatrixXd& coeffs,
                    const Eigen::VectorXd& y, double lambda,
                    const Eigen::MatrixXd& train_x, const KernelSpec& kernel);

/// Regularized logistic regression in the fair hypothesis space, fitted by
/// damped Newton steps on the negative log-likelihood plus
/// lambda * |H alpha|^2. The gradient is H^T X^T (p - Y) + 2 lambda H^T H a.
FairModel dfgr_fit(const Eigen::MatrixXd& h, const Eigen::MatrixXd& x,
                   const Eigen::VectorXd& y, double lambda,
                   const NewtonOptions& opts = {});

/// Top-q generalized eigenpairs of (H^T Sigma_x H, H^T H), eigenvalues
/// descending, each column normalized so |H alpha| = 1 with the largest-
/// magnitude entry of H alpha positive.
PcaSubspace dfpca_fit(const Eigen::MatrixXd& h, const Eigen::MatrixXd& sigma_x,
                      Eigen::Index q);

/// Full fair-PCA classification pipeline: project features onto the top-q
/// fair directions, then ridge on the projections. basis of the returned
/// model is H * V (p×q), so predict() is the plain linear path.
FairModel dfpca_ridge_fit(const Eigen::MatrixXd& h, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, Eigen::Index q,
                          double lambda);

enum class BaselineKind { ridge, logistic, pca_ridge };

/// Unconstrained reference fits in the raw feature space (H = identity).
/// q < 0 means q = p for pca_ridge.
FairModel baseline_fit(BaselineKind kind, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y, double lambda,
                       Eigen::Index q = -1);

/// Raw scores on new points: X H alpha for linear kinds, the logistic of
/// that for the logistic kinds, and kernel expansion for dfkrr.
Eigen::VectorXd predict(const FairModel& model, const Eigen::MatrixXd& x_new);

/// score >= threshold, as 0/1. The 0.5 default applies to probability
/// outputs and to {0,1}-coded regression outputs.
Eigen::VectorXd classify(const Eigen::VectorXd& scores,
                         double threshold = 0.5);

void save_model(const std::string& path, const FairModel& model);
FairModel load_model(const std::string& path);

}  // namespace dfl

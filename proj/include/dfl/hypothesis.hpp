#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

namespace dfl {

struct KernelSpec {
  enum class Kind { linear, rbf };
  Kind kind = Kind::rbf;
  double gamma = 1.0;  // rbf width; ignored for linear
};

/// m random linear hypotheses; row t holds the weight vector of h_t.
/// Entries are i.i.d. N(0, sigma^2) from a dedicated seeded stream.
struct LinearHypothesisBatch {
  Eigen::MatrixXd weights;  // m x p
  double sigma = 1.0;
  uint64_t seed = 0;
};

/// m random kernel hypotheses; row t holds the coefficients c_t over the
/// n training points, so h_t(z) = sum_i c_ti K(x_i, z).
struct KernelHypothesisBatch {
  Eigen::MatrixXd coeffs;  // m x n
  double sigma = 1.0;
  uint64_t seed = 0;
  KernelSpec kernel;
};

/// Row t = the prediction vector of hypothesis t over the n sample points.
struct PredictionMatrix {
  Eigen::MatrixXd values;  // m x n
};

LinearHypothesisBatch generate_linear(Eigen::Index m, Eigen::Index p,
                                      double sigma, uint64_t seed);

KernelHypothesisBatch generate_kernel(Eigen::Index m, Eigen::Index n,
                                      double sigma, uint64_t seed,
                                      const KernelSpec& kernel);

/// values = weights * X^T: entry (t, i) = <h_t, x_i>.
PredictionMatrix predict_linear(const LinearHypothesisBatch& batch,
                                const Eigen::MatrixXd& x);

/// values = C * K. K must be symmetric within 1e-8.
PredictionMatrix predict_kernel(const KernelHypothesisBatch& batch,
                                const Eigen::MatrixXd& gram);

/// K_ij = <x_i, x_j> (linear) or exp(-|x_i-x_j|^2 / (2 gamma^2)) (rbf).
Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, const KernelSpec& spec);

/// Cross-Gram between new points (rows of a) and training points (rows of b).
Eigen::MatrixXd cross_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const KernelSpec& spec);

/// Median pairwise Euclidean distance, the usual default for the rbf width;
/// returns 1 when all points coincide.
double median_pairwise_distance(const Eigen::MatrixXd& x);

void save_linear_batch(const std::string& path,
                       const LinearHypothesisBatch& batch);
LinearHypothesisBatch load_linear_batch(const std::string& path);

void save_kernel_batch(const std::string& path,
                       const KernelHypothesisBatch& batch);
KernelHypothesisBatch load_kernel_batch(const std::string& path);

}  // namespace dfl

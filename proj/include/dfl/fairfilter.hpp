#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dfl/hypothesis.hpp"

namespace dfl {

enum class FilterPolicy : uint8_t { hard = 1, soft = 2 };

/// Indices of the hypotheses the third party certified as fair, out of m
/// candidates. param is the threshold rho under the hard policy and the
/// kernel width sigma2 under the soft one.
struct FairIndexSet {
  std::vector<Eigen::Index> indices;  // sorted ascending, unique
  double param = 0.0;
  FilterPolicy policy = FilterPolicy::hard;
  Eigen::Index m = 0;

  Eigen::Index k() const { return static_cast<Eigen::Index>(indices.size()); }
};

/// Population covariance between a prediction vector and the sensitive
/// attribute — the quantity the third party thresholds.
double estimate_cov(const Eigen::VectorXd& yhat, const Eigen::VectorXd& s);

/// Keep exactly the rows with |cov(row, s)| <= rho (boundary included).
FairIndexSet hard_filter(const PredictionMatrix& preds,
                         const Eigen::VectorXd& s, double rho);

/// Keep row t with probability exp(-|row_t - star|^2 / (2 sigma2^2)):
/// a Gaussian kernel of the distance to a perfectly fair reference
/// prediction vector, normalized to accept the reference itself always.
/// Deterministic per seed; rows are drawn in index order. When s is given,
/// the reference is checked to have |cov(star, s)| <= 1e-8.
FairIndexSet soft_filter(const PredictionMatrix& preds,
                         const Eigen::VectorXd& star_preds, double sigma2,
                         uint64_t seed, const Eigen::VectorXd* s = nullptr);

/// Remove from a prediction vector its component along centered s, which
/// zeroes the empirical covariance with s. Supplies the reference point
/// the soft policy needs. Throws on constant s.
Eigen::VectorXd reference_hypothesis(const Eigen::VectorXd& preds_any,
                                     const Eigen::VectorXd& s);

}  // namespace dfl

#pragma once

#include <Eigen/Dense>
#include <span>

namespace dfl::stats {

// Convention used across the whole library: variances and covariances divide
// by n (population form). The fairness identities rest on exact linearity of
// the sample covariance, which holds for either convention but must be the
// same one everywhere; n is it. Summary "a +/- b" reporting is the one
// exception and uses the n-1 standard deviation (see sample_std).

double mean(const Eigen::VectorXd& v);

double population_variance(const Eigen::VectorXd& v);

/// (1/n) * sum (a_i - mean a)(b_i - mean b); throws DimensionError on
/// mismatched lengths or n < 2.
double population_covariance(const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b);

/// n-1 standard deviation, for summary rows only.
double sample_std(const Eigen::VectorXd& v);

/// Per-column population covariance between the columns of X and v.
Eigen::VectorXd feature_covariances(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& v);

/// Spearman rank correlation (average ranks on ties).
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace dfl::stats

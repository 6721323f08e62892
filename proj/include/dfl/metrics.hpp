#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>

namespace dfl {

/// All group-disparity and accuracy measures for one evaluation.
/// group_rates / group_errors are ordered (s=0, s=1).
struct MetricsReport {
  double sp = 0.0;                // |rate(s=1) - rate(s=0)|
  double nd = 0.0;                // |1 - rate(s=1)/rate(s=0)|, capped
  double classifier_error = 0.0;
  double error_parity = 0.0;      // |er(s=1) - er(s=0)|
  double error_disparate = 0.0;   // |er(s=1)/er(s=0) - 1|, capped
  double cov_fs = 0.0;            // signed cov(raw scores, s)
  std::pair<double, double> group_rates{0.0, 0.0};
  std::pair<double, double> group_errors{0.0, 0.0};

  /// Column order matches csv_header().
  std::string csv_row() const;
  static std::string csv_header();
};

/// |p(pred=1 | s=1) - p(pred=1 | s=0)| with empirical frequencies.
/// Throws when either group is empty.
double statistical_parity(const Eigen::VectorXd& pred,
                          const Eigen::VectorXd& s);

/// |1 - rate(s=1)/rate(s=0)|. A zero denominator yields 0 when the other
/// rate is also 0, else the cap 1.
double normed_disparate(const Eigen::VectorXd& pred, const Eigen::VectorXd& s);

double classifier_error(const Eigen::VectorXd& pred, const Eigen::VectorXd& y);

double error_parity(const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& s);

/// |er(s=1)/er(s=0) - 1| with the same zero-denominator convention as
/// normed_disparate.
double error_disparate(const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& s);

/// Signed population covariance of raw (pre-threshold) scores with s; the
/// sign feeds the quadrant-dependence diagnostic.
double cov_fairness(const Eigen::VectorXd& scores, const Eigen::VectorXd& s);

/// One call computing everything from raw scores + thresholded predictions.
MetricsReport evaluate(const Eigen::VectorXd& scores,
                       const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& s);

}  // namespace dfl

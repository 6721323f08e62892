#include "dfl/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "dfl/errors.hpp"
#include "dfl/fairfilter.hpp"

namespace dfl {

namespace {

// Mean of value[i] over the rows with s[i] == which; throws on empty group.
double group_mean(const Eigen::VectorXd& value, const Eigen::VectorXd& s,
                  double which) {
  double sum = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] == which) {
      sum += value[i];
      ++count;
    }
  }
  if (count == 0)
    throw Error("metrics: group s=" + std::to_string(int(which)) +
                " is empty");
  return sum / static_cast<double>(count);
}

// |1 - num/den| with the bounded zero-denominator convention.
double ratio_deviation(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : 1.0;
  return std::abs(1.0 - num / den);
}

void check_lengths(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw DimensionError("metrics: length mismatch");
}

Eigen::VectorXd mismatches(const Eigen::VectorXd& pred,
                           const Eigen::VectorXd& y) {
  check_lengths(pred, y);
  return (pred.array() != y.array()).cast<double>();
}

}  // namespace

double statistical_parity(const Eigen::VectorXd& pred,
                          const Eigen::VectorXd& s) {
  check_lengths(pred, s);
  return std::abs(group_mean(pred, s, 1.0) - group_mean(pred, s, 0.0));
}

double normed_disparate(const Eigen::VectorXd& pred,
                        const Eigen::VectorXd& s) {
  check_lengths(pred, s);
  return ratio_deviation(group_mean(pred, s, 1.0), group_mean(pred, s, 0.0));
}

double classifier_error(const Eigen::VectorXd& pred,
                        const Eigen::VectorXd& y) {
  return mismatches(pred, y).mean();
}

double error_parity(const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& s) {
  const Eigen::VectorXd err = mismatches(pred, y);
  check_lengths(err, s);
  return std::abs(group_mean(err, s, 1.0) - group_mean(err, s, 0.0));
}

double error_disparate(const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& s) {
  const Eigen::VectorXd err = mismatches(pred, y);
  check_lengths(err, s);
  return ratio_deviation(group_mean(err, s, 1.0), group_mean(err, s, 0.0));
}

double cov_fairness(const Eigen::VectorXd& scores, const Eigen::VectorXd& s) {
  return estimate_cov(scores, s);
}

MetricsReport evaluate(const Eigen::VectorXd& scores,
                       const Eigen::VectorXd& pred, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& s) {
  MetricsReport r;
  r.group_rates = {group_mean(pred, s, 0.0), group_mean(pred, s, 1.0)};
  r.sp = std::abs(r.group_rates.second - r.group_rates.first);
  r.nd = ratio_deviation(r.group_rates.second, r.group_rates.first);
  const Eigen::VectorXd err = mismatches(pred, y);
  r.classifier_error = err.mean();
  r.group_errors = {group_mean(err, s, 0.0), group_mean(err, s, 1.0)};
  r.error_parity = std::abs(r.group_errors.second - r.group_errors.first);
  r.error_disparate =
      ratio_deviation(r.group_errors.second, r.group_errors.first);
  r.cov_fs = cov_fairness(scores, s);
  return r;
}

std::string MetricsReport::csv_header() { return "sp,nd,err,ep,ed,cov_fs"; }

std::string MetricsReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", sp, nd,
                classifier_error, error_parity, error_disparate, cov_fs);
  return buf;
}

}  // namespace dfl

#include "dfl/fairfilter.hpp"

#include <cmath>

#include "dfl/errors.hpp"
#include "dfl/rng.hpp"
#include "dfl/stats.hpp"

namespace dfl {

double estimate_cov(const Eigen::VectorXd& yhat, const Eigen::VectorXd& s) {
  return stats::population_covariance(yhat, s);
}

FairIndexSet hard_filter(const PredictionMatrix& preds,
                         const Eigen::VectorXd& s, double rho) {
  if (preds.values.cols() != s.size())
    throw DimensionError("hard_filter: prediction width != |s|");
  if (rho < 0.0) throw Error("hard_filter: rho must be nonnegative");
  FairIndexSet out;
  out.param = rho;
  out.policy = FilterPolicy::hard;
  out.m = preds.values.rows();
  for (Eigen::Index t = 0; t < preds.values.rows(); ++t)
    if (std::abs(estimate_cov(preds.values.row(t).transpose(), s)) <= rho)
      out.indices.push_back(t);
  return out;
}

FairIndexSet soft_filter(const PredictionMatrix& preds,
                         const Eigen::VectorXd& star_preds, double sigma2,
                         uint64_t seed, const Eigen::VectorXd* s) {
  if (preds.values.cols() != star_preds.size())
    throw DimensionError("soft_filter: prediction width != |star|");
  if (sigma2 <= 0.0) throw Error("soft_filter: sigma2 must be positive");
  if (s != nullptr && std::abs(estimate_cov(star_preds, *s)) > 1e-8)
    throw Error("soft_filter: reference predictions are not fair");
  FairIndexSet out;
  out.param = sigma2;
  out.policy = FilterPolicy::soft;
  out.m = preds.values.rows();
  rng::Stream stream(seed, "fairfilter/soft");
  const double inv = 1.0 / (2.0 * sigma2 * sigma2);
  for (Eigen::Index t = 0; t < preds.values.rows(); ++t) {
    const double d2 =
        (preds.values.row(t).transpose() - star_preds).squaredNorm();
    const double accept_p = std::exp(-d2 * inv);
    if (stream.uniform() < accept_p) out.indices.push_back(t);
  }
  return out;
}

Eigen::VectorXd reference_hypothesis(const Eigen::VectorXd& preds_any,
                                     const Eigen::VectorXd& s) {
  if (preds_any.size() != s.size())
    throw DimensionError("reference_hypothesis: length mismatch");
  const Eigen::VectorXd sc = s.array() - s.mean();
  const double denom = sc.squaredNorm();
  if (denom == 0.0)
    throw Error("reference_hypothesis: sensitive vector is constant");
  return preds_any - (preds_any.dot(sc) / denom) * sc;
}

}  // namespace dfl

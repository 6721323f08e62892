#include "dfl/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dfl/errors.hpp"

namespace dfl::stats {

double mean(const Eigen::VectorXd& v) {
  if (v.size() == 0) throw DimensionError("mean of empty vector");
  return v.mean();
}

double population_variance(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw DimensionError("variance needs at least 2 samples");
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size());
}

double population_covariance(const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw DimensionError("covariance of vectors with different lengths");
  if (a.size() < 2) throw DimensionError("covariance needs at least 2 samples");
  const double ma = a.mean();
  const double mb = b.mean();
  return ((a.array() - ma) * (b.array() - mb)).sum() /
         static_cast<double>(a.size());
}

double sample_std(const Eigen::VectorXd& v) {
  if (v.size() < 2) throw DimensionError("std needs at least 2 samples");
  const double m = v.mean();
  const double ss = (v.array() - m).square().sum();
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

Eigen::VectorXd feature_covariances(const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& v) {
  if (x.rows() != v.size())
    throw DimensionError("feature_covariances: row count mismatch");
  if (x.rows() < 2)
    throw DimensionError("feature_covariances needs at least 2 samples");
  const double n = static_cast<double>(x.rows());
  const Eigen::RowVectorXd col_means = x.colwise().mean();
  const Eigen::VectorXd vc = v.array() - v.mean();
  return (x.rowwise() - col_means).transpose() * vc / n;
}

namespace {

// Ranks with ties sharing the average rank of their block.
std::vector<double> average_ranks(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index i, Eigen::Index j) { return v[i] < v[j]; });
  std::vector<double> ranks(static_cast<size_t>(n));
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw DimensionError("spearman: vectors with different lengths");
  if (a.size() < 2) throw DimensionError("spearman needs at least 2 samples");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const Eigen::Index n = a.size();
  Eigen::VectorXd va(n), vb(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    va[i] = ra[static_cast<size_t>(i)];
    vb[i] = rb[static_cast<size_t>(i)];
  }
  const double ca = population_covariance(va, vb);
  const double sa = std::sqrt(population_variance(va));
  const double sb = std::sqrt(population_variance(vb));
  if (sa == 0.0 || sb == 0.0) return 0.0;
  return ca / (sa * sb);
}

}  // namespace dfl::stats

#include "dfl/hypothesis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "dfl/container.hpp"
#include "dfl/errors.hpp"
#include "dfl/rng.hpp"

namespace dfl {

namespace {

Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                double sigma, uint64_t seed,
                                const char* purpose) {
  if (rows < 1 || cols < 1)
    throw DimensionError("hypothesis batch needs positive dimensions");
  if (sigma < 0.0) throw Error("sigma must be nonnegative");
  rng::Stream stream(seed, purpose);
  Eigen::MatrixXd m(rows, cols);
  // Row-major fill order is part of the determinism contract.
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = sigma * stream.gaussian();
  return m;
}

uint8_t kernel_kind_tag(const KernelSpec& k) {
  return k.kind == KernelSpec::Kind::linear ? 1 : 2;
}

KernelSpec kernel_from_tag(uint8_t tag, double gamma) {
  KernelSpec spec;
  if (tag == 1) {
    spec.kind = KernelSpec::Kind::linear;
  } else if (tag == 2) {
    spec.kind = KernelSpec::Kind::rbf;
    spec.gamma = gamma;
  } else {
    throw ParseError("unknown kernel tag " + std::to_string(tag), 0);
  }
  return spec;
}

}  // namespace

LinearHypothesisBatch generate_linear(Eigen::Index m, Eigen::Index p,
                                      double sigma, uint64_t seed) {
  LinearHypothesisBatch b;
  b.weights = gaussian_matrix(m, p, sigma, seed, "hypothesis/linear");
  b.sigma = sigma;
  b.seed = seed;
  return b;
}

KernelHypothesisBatch generate_kernel(Eigen::Index m, Eigen::Index n,
                                      double sigma, uint64_t seed,
                                      const KernelSpec& kernel) {
  KernelHypothesisBatch b;
  b.coeffs = gaussian_matrix(m, n, sigma, seed, "hypothesis/kernel");
  b.sigma = sigma;
  b.seed = seed;
  b.kernel = kernel;
  return b;
}

PredictionMatrix predict_linear(const LinearHypothesisBatch& batch,
                                const Eigen::MatrixXd& x) {
  if (batch.weights.cols() != x.cols())
    throw DimensionError("predict_linear: feature width mismatch");
  return {batch.weights * x.transpose()};
}

PredictionMatrix predict_kernel(const KernelHypothesisBatch& batch,
                                const Eigen::MatrixXd& gram) {
  if (gram.rows() != gram.cols())
    throw DimensionError("predict_kernel: Gram matrix not square");
  if (batch.coeffs.cols() != gram.rows())
    throw DimensionError("predict_kernel: coefficient width mismatch");
  const double asym = (gram - gram.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-8)
    throw Error("predict_kernel: Gram matrix asymmetric by " +
                std::to_string(asym));
  return {batch.coeffs * gram};
}

Eigen::MatrixXd gram_matrix(const Eigen::MatrixXd& x, const KernelSpec& spec) {
  return cross_gram(x, x, spec);
}

Eigen::MatrixXd cross_gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                           const KernelSpec& spec) {
  if (a.cols() != b.cols())
    throw DimensionError("cross_gram: feature width mismatch");
  if (spec.kind == KernelSpec::Kind::linear) return a * b.transpose();
  if (spec.gamma <= 0.0) throw Error("rbf kernel needs gamma > 0");
  // |a_i - b_j|^2 = |a_i|^2 + |b_j|^2 - 2 <a_i, b_j>
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = (-2.0 * a * b.transpose()).colwise() + na;
  d2.rowwise() += nb.transpose();
  return (d2.array().max(0.0) * (-0.5 / (spec.gamma * spec.gamma))).exp();
}

double median_pairwise_distance(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) return 1.0;
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n) * static_cast<size_t>(n - 1) / 2);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      d.push_back((x.row(i) - x.row(j)).norm());
  const size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid),
                   d.end());
  double med = d[mid];
  if (d.size() % 2 == 0) {
    const double lo =
        *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (lo + med);
  }
  return med > 0.0 ? med : 1.0;
}

void save_linear_batch(const std::string& path,
                       const LinearHypothesisBatch& batch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  container::Header h;
  h.kind = container::RecordKind::linear_batch;
  h.rows = static_cast<uint32_t>(batch.weights.rows());
  h.cols = static_cast<uint32_t>(batch.weights.cols());
  h.sigma_or_lambda = batch.sigma;
  h.seed = batch.seed;
  container::write_header(out, h);
  container::write_matrix(out, batch.weights);
}

LinearHypothesisBatch load_linear_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const auto h = container::read_header(in);
  if (h.kind != container::RecordKind::linear_batch)
    throw ParseError("not a linear hypothesis batch: " + path, 0);
  LinearHypothesisBatch b;
  b.weights = container::read_matrix(in, h.rows, h.cols);
  b.sigma = h.sigma_or_lambda;
  b.seed = h.seed;
  return b;
}

void save_kernel_batch(const std::string& path,
                       const KernelHypothesisBatch& batch) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  container::Header h;
  h.kind = container::RecordKind::kernel_batch;
  h.kernel_kind = kernel_kind_tag(batch.kernel);
  h.rows = static_cast<uint32_t>(batch.coeffs.rows());
  h.cols = static_cast<uint32_t>(batch.coeffs.cols());
  h.sigma_or_lambda = batch.sigma;
  h.seed = batch.seed;
  h.gamma = batch.kernel.kind == KernelSpec::Kind::rbf ? batch.kernel.gamma : 0;
  container::write_header(out, h);
  container::write_matrix(out, batch.coeffs);
}

KernelHypothesisBatch load_kernel_batch(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const auto h = container::read_header(in);
  if (h.kind != container::RecordKind::kernel_batch)
    throw ParseError("not a kernel hypothesis batch: " + path, 0);
  KernelHypothesisBatch b;
  b.coeffs = container::read_matrix(in, h.rows, h.cols);
  b.sigma = h.sigma_or_lambda;
  b.seed = h.seed;
  b.kernel = kernel_from_tag(h.kernel_kind, h.gamma);
  return b;
}

}  // namespace dfl

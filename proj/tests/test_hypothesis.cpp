#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>

#include "dfl/errors.hpp"
#include "dfl/hypothesis.hpp"
#include "doctest.h"
#include "oracles.hpp"

namespace fs = std::filesystem;

TEST_CASE("zero-sigma batches are exactly zero") {
  dfl::LinearHypothesisBatch b = dfl::generate_linear(5, 3, 0.0, 1);
  CHECK(b.weights.cwiseAbs().maxCoeff() == 0.0);
  dfl::KernelSpec spec;
  dfl::KernelHypothesisBatch kb = dfl::generate_kernel(5, 7, 0.0, 1, spec);
  CHECK(kb.coeffs.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("generated weights have mean zero and variance sigma squared") {
  const double sigma = 1.5;
  dfl::LinearHypothesisBatch b = dfl::generate_linear(10000, 4, sigma, 7);
  double mean = b.weights.mean();
  double var = (b.weights.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - sigma * sigma) < 0.05);
}

TEST_CASE("hypothesis generation is bit-reproducible per seed") {
  dfl::LinearHypothesisBatch a = dfl::generate_linear(20, 6, 1.0, 42);
  dfl::LinearHypothesisBatch b = dfl::generate_linear(20, 6, 1.0, 42);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() == 0.0);
  dfl::LinearHypothesisBatch c = dfl::generate_linear(20, 6, 1.0, 43);
  CHECK((a.weights - c.weights).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("linear predictions are the plain inner products") {
  dfl::LinearHypothesisBatch b;
  b.weights.resize(2, 2);
  b.weights << 1, 0, 0, 1;
  Eigen::MatrixXd x(2, 2);
  x << 1, 2, 3, 4;
  dfl::PredictionMatrix preds = dfl::predict_linear(b, x);
  CHECK(preds.values(0, 0) == 1.0);  // <e1, (1,2)>
  CHECK(preds.values(0, 1) == 3.0);
  CHECK(preds.values(1, 0) == 2.0);
  CHECK(preds.values(1, 1) == 4.0);
}

TEST_CASE("rbf gram matches the closed form") {
  Eigen::MatrixXd x(2, 2);
  x << 0, 0, 1, 0;  // distance 1
  dfl::KernelSpec spec;
  spec.kind = dfl::KernelSpec::Kind::rbf;
  spec.gamma = 1.0;
  Eigen::MatrixXd k = dfl::gram_matrix(x, spec);
  CHECK(k(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(k(0, 1) - 0.60653065971263342) < 1e-9);  // exp(-1/2)
  CHECK(k(0, 1) == doctest::Approx(k(1, 0)).epsilon(1e-15));

  spec.gamma = 2.0;
  Eigen::MatrixXd k2 = dfl::gram_matrix(x, spec);
  CHECK(k2(0, 1) == doctest::Approx(std::exp(-1.0 / 8.0)).epsilon(1e-12));
}

TEST_CASE("linear kernel gram equals the outer product of rows") {
  Eigen::MatrixXd x = oracle::random_matrix(6, 3, 31);
  dfl::KernelSpec spec;
  spec.kind = dfl::KernelSpec::Kind::linear;
  Eigen::MatrixXd k = dfl::gram_matrix(x, spec);
  CHECK((k - x * x.transpose()).cwiseAbs().maxCoeff() < 1e-12);

  Eigen::MatrixXd z = oracle::random_matrix(4, 3, 32);
  Eigen::MatrixXd kx = dfl::cross_gram(z, x, spec);
  CHECK((kx - z * x.transpose()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel hypotheses with a linear kernel match linear hypotheses") {
  // A kernel hypothesis sum_j c_j <x_j, .> is the linear hypothesis with
  // weights X^T c; predictions must agree on both train and new points.
  Eigen::MatrixXd x = oracle::random_matrix(9, 4, 33);
  dfl::KernelSpec spec;
  spec.kind = dfl::KernelSpec::Kind::linear;
  dfl::KernelHypothesisBatch kb = dfl::generate_kernel(5, 9, 0.8, 3, spec);
  Eigen::MatrixXd gram = dfl::gram_matrix(x, spec);
  dfl::PredictionMatrix kp = dfl::predict_kernel(kb, gram);

  dfl::LinearHypothesisBatch lb;
  lb.weights = kb.coeffs * x;  // m x p
  dfl::PredictionMatrix lp = dfl::predict_linear(lb, x);
  CHECK((kp.values - lp.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predictions are linear in the hypothesis weights") {
  Eigen::MatrixXd x = oracle::random_matrix(7, 3, 35);
  dfl::LinearHypothesisBatch a = dfl::generate_linear(4, 3, 1.0, 1);
  dfl::LinearHypothesisBatch b = dfl::generate_linear(4, 3, 1.0, 2);
  dfl::LinearHypothesisBatch sum;
  sum.weights = 2.0 * a.weights + 3.0 * b.weights;
  Eigen::MatrixXd lhs = dfl::predict_linear(sum, x).values;
  Eigen::MatrixXd rhs = 2.0 * dfl::predict_linear(a, x).values +
                        3.0 * dfl::predict_linear(b, x).values;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("predict_kernel insists on a symmetric gram") {
  dfl::KernelHypothesisBatch kb = dfl::generate_kernel(2, 3, 1.0, 1, {});
  Eigen::MatrixXd bad = oracle::random_matrix(3, 3, 36);
  bad(0, 1) = bad(1, 0) + 1.0;
  CHECK_THROWS_AS(dfl::predict_kernel(kb, bad), dfl::Error);
}

TEST_CASE("median pairwise distance covers small and degenerate inputs") {
  Eigen::MatrixXd x(3, 1);
  x << 0.0, 1.0, 3.0;  // pairwise distances 1, 3, 2
  CHECK(dfl::median_pairwise_distance(x) == doctest::Approx(2.0));
  Eigen::MatrixXd two(2, 1);
  two << 0.0, 5.0;
  CHECK(dfl::median_pairwise_distance(two) == doctest::Approx(5.0));
  Eigen::MatrixXd same(3, 1);
  same.setConstant(4.0);
  CHECK(dfl::median_pairwise_distance(same) == 1.0);  // degenerate fallback
}

TEST_CASE("hypothesis batches round-trip through their files") {
  std::string path = (fs::temp_directory_path() / "dfl_batch.bin").string();

  dfl::LinearHypothesisBatch lin = dfl::generate_linear(8, 5, 1.25, 77);
  dfl::save_linear_batch(path, lin);
  dfl::LinearHypothesisBatch lin2 = dfl::load_linear_batch(path);
  CHECK((lin.weights - lin2.weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lin2.sigma == 1.25);
  CHECK(lin2.seed == 77);

  dfl::KernelSpec spec;
  spec.kind = dfl::KernelSpec::Kind::rbf;
  spec.gamma = 2.5;
  dfl::KernelHypothesisBatch ker = dfl::generate_kernel(6, 9, 0.5, 78, spec);
  dfl::save_kernel_batch(path, ker);
  dfl::KernelHypothesisBatch ker2 = dfl::load_kernel_batch(path);
  CHECK((ker.coeffs - ker2.coeffs).cwiseAbs().maxCoeff() == 0.0);
  CHECK(ker2.kernel.kind == dfl::KernelSpec::Kind::rbf);
  CHECK(ker2.kernel.gamma == 2.5);
  CHECK(ker2.sigma == 0.5);
  CHECK(ker2.seed == 78);

  fs::remove(path);
}

TEST_CASE("generators reject invalid shapes and scales") {
  CHECK_THROWS_AS(dfl::generate_linear(0, 3, 1.0, 1), dfl::DimensionError);
  CHECK_THROWS_AS(dfl::generate_linear(3, 0, 1.0, 1), dfl::DimensionError);
  CHECK_THROWS_AS(dfl::generate_linear(3, 3, -1.0, 1), dfl::Error);
}

#include "dfl/learners.hpp"

#include <cmath>
#include <fstream>
#include <vector>

#include "dfl/bytes.hpp"
#include "dfl/container.hpp"
#include "dfl/errors.hpp"

namespace dfl {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kResidualTol = 1e-8;

// LDLT solve with iterative refinement; true when the residual lands under
// kResidualTol * (1 + |b|).
bool spd_solve(const MatrixXd& a, const VectorXd& b, VectorXd& x) {
  Eigen::LDLT<MatrixXd> f(a);
  if (f.info() != Eigen::Success) return false;
  x = f.solve(b);
  const double tol = kResidualTol * (1.0 + b.norm());
  for (int pass = 0; pass < 3; ++pass) {
    const VectorXd r = b - a * x;
    if (r.norm() <= tol) return true;
    x += f.solve(r);
  }
  return (b - a * x).norm() <= tol;
}

Eigen::Index rank_of(const MatrixXd& a) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(a);
  return cod.rank();
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

void check_binary(const VectorXd& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] != 0.0 && y[i] != 1.0)
      throw Error("labels must be 0/1 for logistic fitting");
}

uint8_t kind_tag(ModelKind k) { return static_cast<uint8_t>(k) + 1; }

ModelKind kind_from_tag(uint8_t t) {
  if (t < 1 || t > 7) throw ParseError("unknown model kind tag", 0);
  return static_cast<ModelKind>(t - 1);
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::dfrr: return "dfrr";
    case ModelKind::dfkrr: return "dfkrr";
    case ModelKind::dfgr: return "dfgr";
    case ModelKind::dfpca_ridge: return "dfpca+ridge";
    case ModelKind::baseline_ridge: return "baseline-ridge";
    case ModelKind::baseline_logistic: return "baseline-logistic";
    case ModelKind::baseline_pca_ridge: return "baseline-pca+ridge";
  }
  throw Error("unhandled model kind");
}

FairModel dfrr_fit(const MatrixXd& h, const MatrixXd& x, const VectorXd& y,
                   double lambda) {
  if (h.rows() != x.cols()) throw DimensionError("dfrr: H rows != X cols");
  if (x.rows() != y.size()) throw DimensionError("dfrr: X rows != |Y|");
  if (h.cols() < 1) throw DimensionError("dfrr: empty basis");
  if (lambda < 0.0) throw Error("dfrr: lambda must be nonnegative");

  const MatrixXd xh = x * h;
  MatrixXd a = xh.transpose() * xh;
  a.diagonal().array() += lambda;
  const VectorXd b = xh.transpose() * y;

  if (lambda == 0.0) {
    const Eigen::Index r = rank_of(a);
    if (r < h.cols())
      throw SingularSystemError(
          "dfrr: normal equations singular with lambda = 0", r);
  }
  FairModel m;
  if (!spd_solve(a, b, m.alpha))
    throw Error("dfrr: solve did not reach residual tolerance");
  m.kind = ModelKind::dfrr;
  m.basis = h;
  m.lambda = lambda;
  return m;
}

FairModel dfkrr_fit(const MatrixXd& gram, const MatrixXd& coeffs,
                    const VectorXd& y, double lambda, const MatrixXd& train_x,
                    const KernelSpec& kernel) {
  if (gram.rows() != gram.cols()) throw DimensionError("dfkrr: K not square");
  if ((gram - gram.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw Error("dfkrr: K asymmetric");
  if (coeffs.rows() != gram.rows())
    throw DimensionError("dfkrr: C rows != K rows");
  if (gram.rows() != y.size()) throw DimensionError("dfkrr: K rows != |Y|");
  if (coeffs.cols() < 1) throw DimensionError("dfkrr: empty basis");
  if (lambda < 0.0) throw Error("dfkrr: lambda must be nonnegative");

  MatrixXd kl = gram;
  kl.diagonal().array() += lambda;
  const MatrixXd klc = kl * coeffs;  // (K + lambda I) C, n×k
  MatrixXd a = klc.transpose() * klc;
  const VectorXd b = klc.transpose() * y;

  FairModel m;
  if (!spd_solve(a, b, m.alpha)) {
    // Near-singular C^T ... C: nudge the diagonal and retry once.
    a.diagonal().array() += 1e-10 * a.trace() / static_cast<double>(a.rows());
    m.jitter_applied = true;
    if (!spd_solve(a, b, m.alpha))
      throw SingularSystemError("dfkrr: system rank-deficient after jitter",
                                rank_of(a));
  }
  m.kind = ModelKind::dfkrr;
  m.basis = coeffs;
  m.lambda = lambda;
  m.kernel = kernel;
  m.train_x = train_x;
  return m;
}

FairModel dfgr_fit(const MatrixXd& h, const MatrixXd& x, const VectorXd& y,
                   double lambda, const NewtonOptions& opts) {
  if (h.rows() != x.cols()) throw DimensionError("dfgr: H rows != X cols");
  if (x.rows() != y.size()) throw DimensionError("dfgr: X rows != |Y|");
  if (h.cols() < 1) throw DimensionError("dfgr: empty basis");
  if (lambda <= 0.0) throw Error("dfgr: lambda must be positive");
  check_binary(y);

  const Eigen::Index k = h.cols();
  const MatrixXd xh = x * h;
  const MatrixXd hth = h.transpose() * h;

  const auto objective = [&](const VectorXd& alpha) {
    const VectorXd z = xh * alpha;
    double j = lambda * alpha.dot(hth * alpha);
    for (Eigen::Index i = 0; i < z.size(); ++i)
      j += softplus(z[i]) - y[i] * z[i];
    return j;
  };

  FairModel m;
  m.kind = ModelKind::dfgr;
  m.basis = h;
  m.lambda = lambda;
  m.converged = false;

  VectorXd alpha = VectorXd::Zero(k);
  double j_cur = objective(alpha);
  int increases_in_a_row = 0;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    const VectorXd z = xh * alpha;
    VectorXd p(z.size()), w(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      p[i] = sigmoid(z[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    const VectorXd grad =
        xh.transpose() * (p - y) + 2.0 * lambda * (hth * alpha);
    if (grad.lpNorm<Eigen::Infinity>() <= opts.tol) {
      m.converged = true;
      break;
    }
    MatrixXd hess = xh.transpose() * w.asDiagonal() * xh + 2.0 * lambda * hth;
    VectorXd dir;
    if (!spd_solve(hess, grad, dir)) {
      hess.diagonal().array() +=
          1e-10 * hess.trace() / static_cast<double>(k);
      m.jitter_applied = true;
      if (!spd_solve(hess, grad, dir))
        throw SingularSystemError("dfgr: Newton system singular",
                                  rank_of(hess));
    }

    // Backtracking: halve until the objective stops increasing. If no step
    // length helps we accept the smallest one and count it against the
    // divergence budget.
    double s = opts.step;
    VectorXd cand;
    double j_cand = 0.0;
    bool decreased = false;
    for (int halving = 0; halving < 60; ++halving) {
      cand = alpha - s * dir;
      j_cand = objective(cand);
      if (j_cand <= j_cur) {
        decreased = true;
        break;
      }
      s *= 0.5;
    }
    alpha = cand;
    if (decreased) {
      increases_in_a_row = 0;
    } else if (++increases_in_a_row >= 5) {
      throw NonconvergenceError(
          "dfgr: objective increased on 5 consecutive steps",
          std::vector<double>(alpha.data(), alpha.data() + alpha.size()));
    }
    j_cur = j_cand;
  }
  m.alpha = alpha;
  return m;
}

PcaSubspace dfpca_fit(const MatrixXd& h, const MatrixXd& sigma_x,
                      Eigen::Index q) {
  if (sigma_x.rows() != sigma_x.cols())
    throw DimensionError("dfpca: Sigma_x not square");
  if (h.rows() != sigma_x.rows())
    throw DimensionError("dfpca: H rows != Sigma_x size");
  const Eigen::Index k = h.cols();
  if (q < 1 || q > k) throw DimensionError("dfpca: need 1 <= q <= k");
  if ((sigma_x - sigma_x.transpose()).cwiseAbs().maxCoeff() > 1e-8)
    throw Error("dfpca: Sigma_x asymmetric");
  {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma_x,
                                               Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8)
      throw Error("dfpca: Sigma_x not positive semidefinite");
  }

  MatrixXd a = h.transpose() * sigma_x * h;
  a = 0.5 * (a + a.transpose()).eval();
  MatrixXd b = h.transpose() * h;
  bool jittered = false;
  if (Eigen::LLT<MatrixXd>(b).info() != Eigen::Success) {
    b.diagonal().array() += 1e-10 * b.trace() / static_cast<double>(k);
    jittered = true;
    if (Eigen::LLT<MatrixXd>(b).info() != Eigen::Success)
      throw SingularSystemError("dfpca: H^T H singular after jitter",
                                rank_of(b));
  }

  Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(a, b);
  if (ges.info() != Eigen::Success)
    throw Error("dfpca: generalized eigensolver failed");

  PcaSubspace sub;
  sub.basis = h;
  sub.jitter_applied = jittered;
  sub.coeff_vectors.resize(k, q);
  sub.eigenvalues.resize(q);
  // At unit data scale this matches the advertised 1e-8 residual.
  const double res_tol = 1e-8 * std::max(1.0, a.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < q; ++j) {
    const Eigen::Index src = k - 1 - j;  // solver returns ascending order
    VectorXd v = ges.eigenvectors().col(src);
    const double lam = ges.eigenvalues()[src];
    VectorXd hv = h * v;
    v /= hv.norm();
    hv = h * v;
    Eigen::Index imax = 0;
    hv.cwiseAbs().maxCoeff(&imax);
    if (hv[imax] < 0.0) v = -v;
    const double res = (a * v - lam * (h.transpose() * (h * v))).norm();
    if (res > res_tol)
      throw Error("dfpca: eigenpair residual " + std::to_string(res) +
                  " above tolerance");
    sub.coeff_vectors.col(j) = v;
    sub.eigenvalues[j] = lam;
  }
  return sub;
}

FairModel dfpca_ridge_fit(const MatrixXd& h, const MatrixXd& x,
                          const VectorXd& y, Eigen::Index q, double lambda) {
  if (x.rows() < 2) throw DimensionError("dfpca+ridge: need n >= 2");
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const MatrixXd xc = x.rowwise() - mu;
  const MatrixXd sigma =
      xc.transpose() * xc / static_cast<double>(x.rows());

  const PcaSubspace sub = dfpca_fit(h, sigma, q);
  const MatrixXd dirs = h * sub.coeff_vectors;  // p×q fair directions
  const MatrixXd z = x * dirs;

  FairModel ridge = dfrr_fit(MatrixXd::Identity(q, q), z, y, lambda);
  FairModel m;
  m.kind = ModelKind::dfpca_ridge;
  m.alpha = ridge.alpha;
  m.basis = dirs;
  m.lambda = lambda;
  m.jitter_applied = sub.jitter_applied;
  return m;
}

FairModel baseline_fit(BaselineKind kind, const MatrixXd& x, const VectorXd& y,
                       double lambda, Eigen::Index q) {
  const MatrixXd id = MatrixXd::Identity(x.cols(), x.cols());
  FairModel m;
  switch (kind) {
    case BaselineKind::ridge:
      m = dfrr_fit(id, x, y, lambda);
      m.kind = ModelKind::baseline_ridge;
      return m;
    case BaselineKind::logistic:
      m = dfgr_fit(id, x, y, lambda);
      m.kind = ModelKind::baseline_logistic;
      return m;
    case BaselineKind::pca_ridge:
      m = dfpca_ridge_fit(id, x, y, q < 0 ? x.cols() : q, lambda);
      m.kind = ModelKind::baseline_pca_ridge;
      return m;
  }
  throw Error("unhandled baseline kind");
}

Eigen::VectorXd predict(const FairModel& model, const MatrixXd& x_new) {
  if (model.kind == ModelKind::dfkrr) {
    if (x_new.cols() != model.train_x.cols())
      throw DimensionError("predict: feature width mismatch");
    const VectorXd ctilde = model.basis * model.alpha;
    return cross_gram(x_new, model.train_x, model.kernel) * ctilde;
  }
  if (x_new.cols() != model.basis.rows())
    throw DimensionError("predict: feature width mismatch");
  VectorXd scores = x_new * (model.basis * model.alpha);
  if (model.kind == ModelKind::dfgr ||
      model.kind == ModelKind::baseline_logistic)
    for (Eigen::Index i = 0; i < scores.size(); ++i)
      scores[i] = sigmoid(scores[i]);
  return scores;
}

Eigen::VectorXd classify(const VectorXd& scores, double threshold) {
  return (scores.array() >= threshold).cast<double>();
}

void save_model(const std::string& path, const FairModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  container::Header h;
  const bool kernel = model.kind == ModelKind::dfkrr;
  const bool logistic = model.kind == ModelKind::dfgr ||
                        model.kind == ModelKind::baseline_logistic;
  h.kind = kernel ? container::RecordKind::kernel_model
                  : (logistic ? container::RecordKind::logistic_model
                              : container::RecordKind::linear_model);
  h.rows = static_cast<uint32_t>(model.basis.rows());
  h.cols = static_cast<uint32_t>(model.basis.cols());
  h.sigma_or_lambda = model.lambda;
  if (kernel) {
    h.kernel_kind = model.kernel.kind == KernelSpec::Kind::linear ? 1 : 2;
    h.gamma = model.kernel.kind == KernelSpec::Kind::rbf ? model.kernel.gamma
                                                         : 0.0;
  }
  container::write_header(out, h);
  // Payload: kind tag, flags, alpha, basis [, train-point width + points].
  const uint8_t meta[2] = {
      kind_tag(model.kind),
      static_cast<uint8_t>((model.converged ? 1 : 0) |
                           (model.jitter_applied ? 2 : 0))};
  out.write(reinterpret_cast<const char*>(meta), 2);
  container::write_vector(out, model.alpha);
  container::write_matrix(out, model.basis);
  if (kernel) {
    uint8_t widthbuf[4];
    bytes::store_u32(widthbuf, static_cast<uint32_t>(model.train_x.cols()));
    out.write(reinterpret_cast<const char*>(widthbuf), 4);
    container::write_matrix(out, model.train_x);
  }
  if (!out) throw Error("model write failed: " + path);
}

FairModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  const auto h = container::read_header(in);
  if (h.kind != container::RecordKind::linear_model &&
      h.kind != container::RecordKind::kernel_model &&
      h.kind != container::RecordKind::logistic_model)
    throw ParseError("not a model record: " + path, 0);
  uint8_t meta[2];
  in.read(reinterpret_cast<char*>(meta), 2);
  if (!in) throw ParseError("truncated model record", 0);
  FairModel m;
  m.kind = kind_from_tag(meta[0]);
  m.converged = (meta[1] & 1) != 0;
  m.jitter_applied = (meta[1] & 2) != 0;
  m.lambda = h.sigma_or_lambda;
  m.alpha = container::read_vector(in, h.cols);
  m.basis = container::read_matrix(in, h.rows, h.cols);
  if (h.kind == container::RecordKind::kernel_model) {
    uint8_t widthbuf[4];
    in.read(reinterpret_cast<char*>(widthbuf), 4);
    if (!in) throw ParseError("truncated model record", 0);
    const uint32_t width = bytes::load_u32(widthbuf);
    m.train_x = container::read_matrix(in, h.rows, width);
    m.kernel.kind = h.kernel_kind == 1 ? KernelSpec::Kind::linear
                                       : KernelSpec::Kind::rbf;
    m.kernel.gamma = h.gamma;
  }
  return m;
}

}  // namespace dfl

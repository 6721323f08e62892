#include "dfl/theory.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "dfl/dataset.hpp"
#include "dfl/errors.hpp"
#include "dfl/fairfilter.hpp"
#include "dfl/hypothesis.hpp"
#include "dfl/learners.hpp"
#include "dfl/metrics.hpp"
#include "dfl/rng.hpp"
#include "dfl/stats.hpp"

namespace dfl {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Bernoulli(1/2) vector with both groups present and a usable feature
// covariance signal; redraws are deterministic within the stream.
Eigen::VectorXd draw_sensitive(rng::Stream& stream, Eigen::Index n,
                               const Eigen::MatrixXd& x) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i)
      s[i] = stream.uniform() < 0.5 ? 0.0 : 1.0;
    const double mean = s.mean();
    if (mean == 0.0 || mean == 1.0) continue;
    if (stats::feature_covariances(x, s).squaredNorm() < 1e-12) continue;
    return s;
  }
  throw Error("could not draw a usable sensitive vector");
}

}  // namespace

std::string BoundReport::to_text() const {
  std::ostringstream out;
  out << "report: " << name << "\n"
      << "  bound_value:     " << fmt6(bound_value) << "\n"
      << "  empirical_value: " << fmt6(empirical_value) << "\n"
      << "  trials:          " << trials << "\n"
      << "  violation_rate:  " << fmt6(violation_rate) << "\n"
      << "  vacuous:         " << (vacuous ? "yes" : "no") << "\n"
      << "  passed:          " << (passed ? "yes" : "no") << "\n";
  for (const auto& [key, value] : parameters)
    out << "  param " << key << " = " << fmt6(value) << "\n";
  for (const auto& line : detail) out << "  " << line << "\n";
  return out.str();
}

std::string BoundReport::csv_header() {
  return "name,bound_value,empirical_value,trials,violation_rate,vacuous,"
         "passed,parameters";
}

std::string BoundReport::csv_row() const {
  std::ostringstream out;
  out << name << ',' << fmt(bound_value) << ',' << fmt(empirical_value) << ','
      << trials << ',' << fmt(violation_rate) << ',' << (vacuous ? 1 : 0)
      << ',' << (passed ? 1 : 0) << ',';
  bool first = true;
  for (const auto& [key, value] : parameters) {
    if (!first) out << ';';
    out << key << '=' << fmt(value);
    first = false;
  }
  return out.str();
}

double sp_bound(double k, double alpha_norm, double rho, double s0,
                double s1) {
  if (!(s0 > 0.0 && s0 < 1.0 && s1 > 0.0 && s1 < 1.0) ||
      std::abs(s0 + s1 - 1.0) > 1e-12)
    throw Error("sp_bound: group rates must be in (0,1) and sum to 1");
  if (k < 0.0 || alpha_norm < 0.0 || rho < 0.0)
    throw Error("sp_bound: negative argument");
  return std::sqrt(k) * alpha_norm * rho / (s0 * s1);
}

double k_bound_linear(double m, double sigma, double cov_vec_norm,
                      double rho) {
  if (rho <= 0.0) throw Error("k_bound_linear: rho must be positive");
  if (m < 0.0 || sigma < 0.0 || cov_vec_norm < 0.0)
    throw Error("k_bound_linear: negative argument");
  const double ratio = sigma * cov_vec_norm / rho;
  return std::max(0.0, m * (1.0 - ratio * ratio));
}

double distortion_bound(double c, double k, double inner_hstar_x) {
  if (c < 0.0 || c >= 1.0) throw Error("distortion_bound: need 0 <= c < 1");
  if (k < 1.0) throw Error("distortion_bound: need k >= 1");
  const double u2 = inner_hstar_x * inner_hstar_x;
  const double g = std::exp(c * k * u2 / (4.0 - 2.0 * c)) +
                   std::exp(-c * k * u2 / (2.0 + 2.0 * c));
  return g * std::exp(-(c * c * k) / 8.0);
}

double complexity_term(double n, double k, double delta) {
  return 2.0 * std::sqrt(((k + 1.0) * std::log(std::exp(1.0) * n / (k + 1.0)) +
                          std::log(1.0 / delta)) /
                         n);
}

double generalization_bound(double emp_error, double n, double k, double delta,
                            const Eigen::VectorXd& inner_f,
                            const Eigen::VectorXd& inner_hstar) {
  if (!(delta > 0.0 && delta < 0.25))
    throw Error("generalization_bound: need 0 < delta < 1/4");
  if (inner_f.size() != inner_hstar.size())
    throw DimensionError("generalization_bound: inner-product length mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < inner_f.size(); ++i) {
    const double fi = std::abs(inner_f[i]);
    const double ci = fi / (2.0 + fi);
    sum += distortion_bound(ci, k, inner_hstar[i]);
  }
  return emp_error + complexity_term(n, k, delta) + 4.0 / (n * delta) * sum;
}

BoundReport validate_span_fairness(const SpanFairnessParams& params) {
  BoundReport rep;
  rep.name = "span-fairness";
  rep.trials = params.trials;
  rep.parameters = {{"n", double(params.n)},
                    {"p", double(params.p)},
                    {"k_max", double(params.k_max)},
                    {"rho", params.rho}};
  constexpr double kTol = 1e-10;
  rep.bound_value = kTol;

  long violations = 0;
  double max_slack = -1.0;
  for (long t = 0; t < params.trials; ++t) {
    rng::Stream stream(rng::stream_seed(params.seed, "spanfair/trial",
                                        static_cast<uint64_t>(t)));
    const Eigen::Index k =
        1 + static_cast<Eigen::Index>(stream.below(uint64_t(params.k_max)));
    Eigen::MatrixXd x(params.n, params.p);
    for (Eigen::Index i = 0; i < params.n; ++i)
      for (Eigen::Index j = 0; j < params.p; ++j) x(i, j) = stream.gaussian();
    const Eigen::VectorXd s = draw_sensitive(stream, params.n, x);
    const Eigen::VectorXd c = stats::feature_covariances(x, s);
    const double cc = estimate_cov(x * c, s);  // ~ |c|^2, measured

    // Build each column to land on a covariance drawn inside [-rho, rho].
    Eigen::MatrixXd h(params.p, k);
    for (Eigen::Index j = 0; j < k; ++j) {
      Eigen::VectorXd col(params.p);
      for (Eigen::Index a = 0; a < params.p; ++a) col[a] = stream.gaussian();
      const double target = params.rho * 0.999 * (2.0 * stream.uniform() - 1.0);
      const double have = estimate_cov(x * col, s);
      col += ((target - have) / cc) * c;
      h.col(j) = col;
    }
    Eigen::VectorXd alpha(k);
    for (Eigen::Index j = 0; j < k; ++j) alpha[j] = stream.gaussian();
    alpha *= stream.uniform(0.1, 3.0);

    const double cov_f = estimate_cov(x * (h * alpha), s);
    const double ceiling =
        std::sqrt(double(k)) * alpha.norm() * params.rho;
    const double slack = std::abs(cov_f) - ceiling;
    max_slack = std::max(max_slack, slack);
    if (slack > kTol) ++violations;
  }
  rep.empirical_value = max_slack;
  rep.violation_rate = double(violations) / double(params.trials);
  rep.passed = violations == 0;
  rep.detail.push_back("max |cov(f,s)| - sqrt(k)|alpha|rho = " +
                       fmt(max_slack));
  return rep;
}

BoundReport validate_fair_count(const FairCountParams& params) {
  BoundReport rep;
  rep.name = "fair-count";
  rep.trials = params.trials;

  const Dataset ds = synth_biased(params.n, params.p, params.bias,
                                  rng::stream_seed(params.seed,
                                                   "faircount/data"));
  const double cov_norm =
      stats::feature_covariances(ds.features, ds.sensitive).norm();
  rep.bound_value =
      k_bound_linear(double(params.m), params.sigma, cov_norm, params.rho);

  Eigen::VectorXd counts(params.trials);
  for (long t = 0; t < params.trials; ++t) {
    const auto batch = generate_linear(
        params.m, params.p, params.sigma,
        rng::stream_seed(params.seed, "faircount/hyp", uint64_t(t)));
    const auto preds = predict_linear(batch, ds.features);
    counts[t] = double(hard_filter(preds, ds.sensitive, params.rho).k());
  }
  rep.empirical_value = counts.mean();
  const double se =
      stats::sample_std(counts) / std::sqrt(double(params.trials));
  long below = 0;
  for (long t = 0; t < params.trials; ++t)
    if (counts[t] < rep.bound_value) ++below;
  rep.violation_rate = double(below) / double(params.trials);
  rep.passed = rep.empirical_value >= rep.bound_value - 3.0 * se;
  rep.parameters = {{"m", double(params.m)},     {"n", double(params.n)},
                    {"p", double(params.p)},     {"sigma", params.sigma},
                    {"rho", params.rho},         {"bias", params.bias},
                    {"cov_vec_norm", cov_norm},  {"std_error", se}};
  rep.detail.push_back("mean k = " + fmt6(rep.empirical_value) +
                       ", bound = " + fmt6(rep.bound_value) + ", 3*SE = " +
                       fmt6(3.0 * se));
  return rep;
}

BoundReport validate_distortion(const DistortionParams& params) {
  BoundReport rep;
  rep.name = "distortion";
  rep.trials = params.trials;
  rep.parameters = {{"k", double(params.k)},
                    {"hstar_scale", params.hstar_scale}};

  const Eigen::Index dim = 16;
  rng::Stream stream(params.seed, "distortion");
  Eigen::VectorXd x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) x[i] = stream.gaussian();
  x.normalize();
  const Eigen::VectorXd hstar = params.hstar_scale * x;

  Eigen::VectorXd deviations(params.trials);
  for (long t = 0; t < params.trials; ++t) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < params.k; ++j) {
      double z = 0.0;
      for (Eigen::Index i = 0; i < dim; ++i)
        z += (hstar[i] + stream.gaussian()) * x[i];
      sum += z * z;
    }
    deviations[t] = std::abs(sum / double(params.k) - 1.0);
  }

  double worst_excess = -1.0;
  double min_bound = std::numeric_limits<double>::infinity();
  int failed_points = 0;
  for (double c : params.c_grid) {
    long hits = 0;
    for (long t = 0; t < params.trials; ++t)
      if (deviations[t] >= c) ++hits;
    const double emp = double(hits) / double(params.trials);
    const double bnd =
        distortion_bound(c, double(params.k), params.hstar_scale);
    const double se = std::sqrt(emp * (1.0 - emp) / double(params.trials));
    const bool ok = emp <= bnd + 3.0 * se;
    if (!ok) ++failed_points;
    worst_excess = std::max(worst_excess, emp - bnd);
    min_bound = std::min(min_bound, bnd);
    rep.detail.push_back("c=" + fmt6(c) + " empirical=" + fmt6(emp) +
                         " bound=" + fmt6(bnd) + (ok ? " ok" : " VIOLATED"));
  }
  rep.bound_value = min_bound;
  rep.empirical_value = worst_excess;
  rep.violation_rate = double(failed_points) / double(params.c_grid.size());
  rep.vacuous = min_bound >= 1.0;
  rep.passed = failed_points == 0;
  return rep;
}

BoundReport validate_sp_bound(const SpBoundParams& params) {
  BoundReport rep;
  rep.name = "sp-bound";
  rep.parameters = {{"n", double(params.n)},   {"p", double(params.p)},
                    {"bias", params.bias},     {"m", double(params.m)},
                    {"sigma", params.sigma},   {"rho", params.rho},
                    {"lambda", params.lambda}};
  constexpr double kMargin = 0.02;

  long done = 0, skipped = 0, violations = 0, positive_cov = 0;
  double sp_sum = 0.0, bound_sum = 0.0;
  bool any_vacuous = false;
  for (long t = 0; t < params.trials; ++t) {
    const Dataset raw = synth_biased(
        params.n, params.p, params.bias,
        rng::stream_seed(params.seed, "spbound/data", uint64_t(t)));
    std::vector<Eigen::Index> all(static_cast<size_t>(raw.n()));
    for (Eigen::Index i = 0; i < raw.n(); ++i) all[size_t(i)] = i;
    const Dataset ds = standardize(raw, all).dataset;

    const auto batch = generate_linear(
        params.m, params.p, params.sigma,
        rng::stream_seed(params.seed, "spbound/hyp", uint64_t(t)));
    const auto preds = predict_linear(batch, ds.features);
    const auto fair = hard_filter(preds, ds.sensitive, params.rho);
    if (fair.k() == 0) {
      ++skipped;
      continue;
    }
    Eigen::MatrixXd h(params.p, fair.k());
    for (Eigen::Index j = 0; j < fair.k(); ++j)
      h.col(j) = batch.weights.row(fair.indices[size_t(j)]).transpose();

    const FairModel model = dfrr_fit(h, ds.features, ds.labels, params.lambda);
    const Eigen::VectorXd scores = predict(model, ds.features);
    // Scores of a ridge fit on standardized features are centered, so the
    // decision point 0.5 shifts by the training label mean.
    const Eigen::VectorXd pred =
        classify(scores, 0.5 - ds.labels.mean());

    const double s1 = ds.sensitive.mean();
    const double bound = sp_bound(double(fair.k()), model.alpha.norm(),
                                  params.rho, 1.0 - s1, s1);
    const double sp = statistical_parity(pred, ds.sensitive);
    ++done;
    sp_sum += sp;
    bound_sum += bound;
    if (bound >= 1.0) any_vacuous = true;
    if (sp > bound + kMargin) ++violations;
    if (cov_fairness(scores, ds.sensitive) > 0.0) ++positive_cov;
  }
  if (done == 0) throw Error("validate_sp_bound: every trial was skipped");
  rep.trials = done;
  rep.empirical_value = sp_sum / double(done);
  rep.bound_value = bound_sum / double(done);
  rep.violation_rate = double(violations) / double(done);
  rep.vacuous = any_vacuous;
  const double pos_frac = double(positive_cov) / double(done);
  rep.parameters["positive_cov_fraction"] = pos_frac;
  rep.parameters["skipped_trials"] = double(skipped);
  rep.passed = rep.violation_rate <= 0.05 && pos_frac >= 0.8;
  rep.detail.push_back("violations over bound+" + fmt6(kMargin) + ": " +
                       std::to_string(violations) + "/" +
                       std::to_string(done));
  rep.detail.push_back("positive cov(f,s) fraction: " + fmt6(pos_frac));
  return rep;
}

}  // namespace dfl

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dfl {

/// Outcome of one closed-form bound evaluation or Monte Carlo validation.
struct BoundReport {
  std::string name;
  double bound_value = 0.0;
  double empirical_value = 0.0;
  long trials = 0;
  double violation_rate = 0.0;
  bool vacuous = false;  // bound >= 1 where the bounded quantity is a rate
  bool passed = true;
  std::map<std::string, double> parameters;
  std::vector<std::string> detail;  // per-grid-point lines, diagnostics

  std::string to_text() const;
  std::string csv_row() const;
  static std::string csv_header();
};

/// Statistical-parity ceiling sqrt(k) * |alpha| * rho / (s0 * s1) for a
/// group split (s0, s1). Throws unless s0, s1 in (0,1) and s0 + s1 = 1.
double sp_bound(double k, double alpha_norm, double rho, double s0, double s1);

/// Expected surviving-hypothesis count floor for Gaussian linear
/// hypotheses: m * (1 - sigma^2 |cov_vec|^2 / rho^2), clamped at 0.
double k_bound_linear(double m, double sigma, double cov_vec_norm, double rho);

/// Tail bound on relative squared-norm distortion after projecting onto k
/// random directions centered at h*: g * exp(-c^2 k / 8) with
/// g = exp(c k u^2 / (4-2c)) + exp(-c k u^2 / (2+2c)), u = <h*, x>.
double distortion_bound(double c, double k, double inner_hstar_x);

/// The capacity term 2 sqrt(((k+1) ln(e n/(k+1)) + ln(1/delta)) / n).
double complexity_term(double n, double k, double delta);

/// Soft-policy generalization ceiling: empirical error + complexity term +
/// (4/(n delta)) * sum_i g(x_i) exp(-k <f,x_i>^2 / (8 (2+|<f,x_i>|)^2)),
/// with c_i = |<f,x_i>| / (2 + |<f,x_i>|). Caller supplies unit-norm f, x.
double generalization_bound(double emp_error, double n, double k, double delta,
                            const Eigen::VectorXd& inner_f,
                            const Eigen::VectorXd& inner_hstar);

// ---- Monte Carlo validators ----

struct SpanFairnessParams {
  long trials = 1000;
  Eigen::Index n = 40;
  Eigen::Index p = 6;
  Eigen::Index k_max = 8;
  double rho = 0.1;
  uint64_t seed = 1;
};

/// Exact propagation check: bases whose columns are individually rho-fair
/// on the sample must give |cov(f, s)| <= sqrt(k) |alpha| rho + 1e-10 for
/// every coefficient vector. Passes only with zero violations.
BoundReport validate_span_fairness(const SpanFairnessParams& params);

struct FairCountParams {
  long trials = 200;
  Eigen::Index m = 500;
  Eigen::Index n = 1500;
  Eigen::Index p = 8;
  double sigma = 1.0;
  double rho = 0.2;
  double bias = 0.5;
  uint64_t seed = 1;
};

/// Mean surviving count vs. k_bound_linear on synthetic biased data; passes
/// when mean k >= bound - 3 standard errors.
BoundReport validate_fair_count(const FairCountParams& params);

struct DistortionParams {
  long trials = 10000;
  Eigen::Index k = 16;
  std::vector<double> c_grid = {0.3, 0.5, 0.7};
  double hstar_scale = 0.0;
  uint64_t seed = 1;
};

/// Projection-distortion tails vs. distortion_bound on every grid point;
/// passes when empirical <= bound + 3 binomial SE everywhere.
BoundReport validate_distortion(const DistortionParams& params);

struct SpBoundParams {
  long trials = 500;
  Eigen::Index n = 500;
  Eigen::Index p = 8;
  double bias = 0.5;
  Eigen::Index m = 200;
  double sigma = 1.0;
  double rho = 0.05;
  double lambda = 1.0;
  uint64_t seed = 1;
};

/// Statistical diagnostic of the SP ceiling on synthetic positively
/// dependent data: full pipeline per trial; passes when at most 5% of
/// trials exceed sp_bound + 0.02. Also reports the fraction of trials with
/// positive cov(f(x), s).
BoundReport validate_sp_bound(const SpBoundParams& params);

}  // namespace dfl

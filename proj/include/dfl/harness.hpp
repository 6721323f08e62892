#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfl/dataset.hpp"
#include "dfl/metrics.hpp"

namespace dfl {

/// Everything a multi-trial experiment needs. Values come from defaults,
/// then a key=value config file, then command-line flags, in that order of
/// precedence (handled by the CLI front end).
struct ExperimentConfig {
  // Data: a CSV with a schema preset, or the synthetic generator.
  std::string dataset;  // empty -> synthetic
  std::string schema = "community-crime";
  Eigen::Index synth_n = 2000;
  Eigen::Index synth_p = 8;
  double synth_bias = 0.5;

  // Learner: dfrr | dfkrr | dfgr | dfpca | ridge | logistic | pca.
  std::string learner = "dfrr";
  Eigen::Index m = 5000;
  double sigma = 1.0;
  double rho = 0.1;
  bool soft = false;     // soft threshold policy with width sigma2
  double sigma2 = 1.0;
  double lambda = 0.1;
  Eigen::Index q = 2;    // dfpca/pca target dimension
  std::string kernel = "rbf";  // dfkrr: rbf | linear
  double gamma = 0.0;          // 0 -> median pairwise distance heuristic

  long trials = 50;
  double train_frac = 0.75;
  uint64_t seed = 1;

  // Third party: "inproc", "loopback" (per-trial local TCP service), or an
  // external "host:port".
  std::string tp_addr = "inproc";

  std::string out_dir = "out";
  int threads = 1;

  void validate() const;  // throws Error on out-of-range values
};

struct TrialRow {
  int trial = 0;
  Eigen::Index k = 0;
  bool failed = false;
  std::string reason;
  MetricsReport metrics;
};

struct RunResult {
  std::vector<TrialRow> rows;
  long succeeded = 0;
  // Over succeeded trials, order: k, sp, nd, err, ep, ed, cov_fs.
  std::array<double, 7> mean{};
  std::array<double, 7> stdev{};  // sample (n-1) std, as in a+/-b tables
  std::string results_csv_path;
  std::string manifest_path;
};

/// Full experiment: per trial split -> standardize -> generate -> filter ->
/// fit -> evaluate on the held-out quarter. Writes results.csv (one row per
/// trial plus mean/std rows), per-trial split files, and a manifest with
/// the resolved config and input hashes. Trials with an empty fair set are
/// recorded as failed and excluded from the summary.
RunResult run(const ExperimentConfig& config);

struct SweepPoint {
  double rho = 0.0;
  double mean_sp = 0.0;
  double mean_err = 0.0;
  double mean_k = 0.0;
  long failed = 0;
};

/// One run per grid point with identical trial seeds (paired comparison);
/// writes <out_dir>/sweep.csv and per-point results under rho_<value>/.
std::vector<SweepPoint> sweep_rho(const ExperimentConfig& config,
                                  const std::vector<double>& rho_grid);

struct CovSignResult {
  std::vector<double> cov;  // per succeeded trial, signed
  double fraction_positive = 0.0;
};

/// Signed cov(f(x), s) per trial; writes <out_dir>/cov_sign.csv.
CovSignResult cov_sign_diagnostic(ExperimentConfig config, long trials);

/// Run the named theory validator(s): span-fair, fair-count, distortion,
/// sp-bound, or all (aliases lemma2, lemma3, lemma5, theorem4 accepted).
/// Writes a text and a CSV report per validator; returns false when any
/// validator failed its tolerance.
bool validate_theory(const std::string& which, uint64_t seed,
                     long trials_override, const std::string& out_dir);

}  // namespace dfl

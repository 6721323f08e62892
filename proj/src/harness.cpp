#include "dfl/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "dfl/errors.hpp"
#include "dfl/fairfilter.hpp"
#include "dfl/hypothesis.hpp"
#include "dfl/learners.hpp"
#include "dfl/protocol.hpp"
#include "dfl/rng.hpp"
#include "dfl/sha256.hpp"
#include "dfl/stats.hpp"
#include "dfl/theory.hpp"

namespace dfl {
namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ModelKind learner_kind(const std::string& name) {
  if (name == "dfrr") return ModelKind::dfrr;
  if (name == "dfkrr") return ModelKind::dfkrr;
  if (name == "dfgr") return ModelKind::dfgr;
  if (name == "dfpca") return ModelKind::dfpca_ridge;
  if (name == "ridge") return ModelKind::baseline_ridge;
  if (name == "logistic") return ModelKind::baseline_logistic;
  if (name == "pca") return ModelKind::baseline_pca_ridge;
  throw Error("unknown learner: " + name);
}

bool filtered_kind(ModelKind k) {
  return k == ModelKind::dfrr || k == ModelKind::dfkrr ||
         k == ModelKind::dfgr || k == ModelKind::dfpca_ridge;
}

bool logistic_kind(ModelKind k) {
  return k == ModelKind::dfgr || k == ModelKind::baseline_logistic;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& x,
                          const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    out.row(i) = x.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

Eigen::VectorXd take(const Eigen::VectorXd& v,
                     const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out[i] = v[idx[static_cast<std::size_t>(i)]];
  return out;
}

FairIndexSet request_fair(const ExperimentConfig& cfg,
                          const PredictionMatrix& preds,
                          const Eigen::VectorXd& s_train, FilterPolicy policy,
                          double param, uint64_t tp_seed, int trial) {
  uint32_t tid = static_cast<uint32_t>(trial);
  if (cfg.tp_addr == "inproc")
    return proto::apply_policy(preds, s_train, policy, param, tp_seed, tid);
  if (cfg.tp_addr == "loopback") {
    // Short-lived local service per trial; the fair set it computes is
    // identical to the in-process path for the same seeds.
    proto::TpServer server(s_train, tp_seed);
    uint16_t port = server.start("127.0.0.1", 0);
    FairIndexSet fset = proto::dc_request_fair_set(
        "127.0.0.1:" + std::to_string(port), preds, {policy, param}, tid,
        cfg.seed);
    server.stop();
    return fset;
  }
  return proto::dc_request_fair_set(cfg.tp_addr, preds, {policy, param}, tid,
                                    cfg.seed);
}

struct TrialContext {
  const ExperimentConfig& cfg;
  const Dataset& ds;
  ModelKind kind;
  std::string split_dir;
};

TrialRow run_trial(const TrialContext& ctx, int trial) {
  TrialRow row;
  row.trial = trial;
  const ExperimentConfig& cfg = ctx.cfg;
  try {
    uint64_t trial_seed = rng::mix(cfg.seed, static_cast<uint64_t>(trial));
    SplitIndices sp = split(ctx.ds.n(), cfg.train_frac, trial_seed, trial);
    write_split(ctx.split_dir, sp);

    StandardizeResult st = standardize(ctx.ds, sp.train);
    Eigen::MatrixXd xtr = take_rows(st.dataset.features, sp.train);
    Eigen::MatrixXd xte = take_rows(st.dataset.features, sp.test);
    Eigen::VectorXd ytr = take(st.dataset.labels, sp.train);
    Eigen::VectorXd yte = take(st.dataset.labels, sp.test);
    Eigen::VectorXd str = take(st.dataset.sensitive, sp.train);
    Eigen::VectorXd ste = take(st.dataset.sensitive, sp.test);

    FairModel model;
    if (filtered_kind(ctx.kind)) {
      FilterPolicy policy = cfg.soft ? FilterPolicy::soft : FilterPolicy::hard;
      double param = cfg.soft ? cfg.sigma2 : cfg.rho;
      uint64_t tp_seed = rng::stream_seed(cfg.seed, "tp");
      uint64_t hyp_seed = rng::stream_seed(trial_seed, "hypotheses");

      PredictionMatrix preds;
      LinearHypothesisBatch lin;
      KernelHypothesisBatch ker;
      KernelSpec kspec;
      Eigen::MatrixXd ktr;
      if (ctx.kind == ModelKind::dfkrr) {
        kspec.kind = cfg.kernel == "linear" ? KernelSpec::Kind::linear
                                            : KernelSpec::Kind::rbf;
        kspec.gamma =
            cfg.gamma > 0.0 ? cfg.gamma : median_pairwise_distance(xtr);
        ktr = gram_matrix(xtr, kspec);
        ker = generate_kernel(cfg.m, xtr.rows(), cfg.sigma, hyp_seed, kspec);
        preds = predict_kernel(ker, ktr);
      } else {
        lin = generate_linear(cfg.m, ctx.ds.p(), cfg.sigma, hyp_seed);
        preds = predict_linear(lin, xtr);
      }

      FairIndexSet fset =
          request_fair(cfg, preds, str, policy, param, tp_seed, trial);
      row.k = fset.k();
      if (fset.k() == 0) {
        row.failed = true;
        row.reason = "empty fair set";
        return row;
      }

      if (ctx.kind == ModelKind::dfkrr) {
        Eigen::MatrixXd coeffs(xtr.rows(), fset.k());
        for (Eigen::Index j = 0; j < fset.k(); ++j)
          coeffs.col(j) =
              ker.coeffs.row(fset.indices[static_cast<std::size_t>(j)]);
        model = dfkrr_fit(ktr, coeffs, ytr, cfg.lambda, xtr, kspec);
      } else {
        Eigen::MatrixXd h(ctx.ds.p(), fset.k());
        for (Eigen::Index j = 0; j < fset.k(); ++j)
          h.col(j) = lin.weights.row(fset.indices[static_cast<std::size_t>(j)]);
        if (ctx.kind == ModelKind::dfrr) {
          model = dfrr_fit(h, xtr, ytr, cfg.lambda);
        } else if (ctx.kind == ModelKind::dfgr) {
          model = dfgr_fit(h, xtr, ytr, cfg.lambda);
        } else {
          Eigen::Index q = std::min<Eigen::Index>(cfg.q, fset.k());
          model = dfpca_ridge_fit(h, xtr, ytr, q, cfg.lambda);
        }
      }
    } else {
      BaselineKind bk = ctx.kind == ModelKind::baseline_ridge
                            ? BaselineKind::ridge
                        : ctx.kind == ModelKind::baseline_logistic
                            ? BaselineKind::logistic
                            : BaselineKind::pca_ridge;
      model = baseline_fit(bk, xtr, ytr, cfg.lambda,
                           bk == BaselineKind::pca_ridge ? cfg.q : -1);
      row.k = model.basis.cols();
    }

    // Mean-matching threshold: classify(score) should agree with
    // classify(score + (mean(y) - mean(score))) at 0.5. For zero-mean
    // linear scores this is 0.5 - mean(y_train); probability outputs keep
    // the plain 0.5.
    double threshold = 0.5;
    if (!logistic_kind(ctx.kind)) {
      Eigen::VectorXd train_scores = predict(model, xtr);
      threshold = 0.5 - (stats::mean(ytr) - stats::mean(train_scores));
    }
    Eigen::VectorXd scores = predict(model, xte);
    Eigen::VectorXd pred = classify(scores, threshold);
    row.metrics = evaluate(scores, pred, yte, ste);
  } catch (const std::exception& e) {
    row.failed = true;
    row.reason = e.what();
  }
  return row;
}

std::string results_csv(const RunResult& res) {
  std::ostringstream out;
  out << "trial,k," << MetricsReport::csv_header() << "\n";
  for (const TrialRow& r : res.rows) {
    out << r.trial << "," << r.k << ",";
    if (r.failed)
      out << "nan,nan,nan,nan,nan,nan";
    else
      out << r.metrics.csv_row();
    out << "\n";
  }
  if (res.succeeded > 0) {
    out << "mean";
    for (double v : res.mean) out << "," << fmt(v);
    out << "\n";
    out << "std";
    for (double v : res.stdev) out << "," << fmt(v);
    out << "\n";
  }
  return out.str();
}

std::string manifest_text(const ExperimentConfig& c,
                          const std::string& dataset_sha,
                          const RunResult& res, const std::string& csv_sha) {
  std::ostringstream out;
  out << "config:\n";
  out << "  dataset = " << (c.dataset.empty() ? "(synthetic)" : c.dataset)
      << "\n";
  if (c.dataset.empty()) {
    out << "  synth_n = " << c.synth_n << "\n";
    out << "  synth_p = " << c.synth_p << "\n";
    out << "  synth_bias = " << fmt(c.synth_bias) << "\n";
  } else {
    out << "  schema = " << c.schema << "\n";
  }
  out << "  learner = " << c.learner << "\n";
  out << "  m = " << c.m << "\n";
  out << "  sigma = " << fmt(c.sigma) << "\n";
  out << "  policy = " << (c.soft ? "soft" : "hard") << "\n";
  out << "  rho = " << fmt(c.rho) << "\n";
  out << "  sigma2 = " << fmt(c.sigma2) << "\n";
  out << "  lambda = " << fmt(c.lambda) << "\n";
  out << "  q = " << c.q << "\n";
  out << "  kernel = " << c.kernel << "\n";
  out << "  gamma = " << fmt(c.gamma) << "\n";
  out << "  trials = " << c.trials << "\n";
  out << "  train_frac = " << fmt(c.train_frac) << "\n";
  out << "  seed = " << c.seed << "\n";
  out << "  tp_addr = " << c.tp_addr << "\n";
  out << "  threads = " << c.threads << "\n";
  out << "inputs:\n";
  if (!c.dataset.empty()) out << "  dataset_sha256 = " << dataset_sha << "\n";
  out << "results:\n";
  out << "  succeeded = " << res.succeeded << "\n";
  out << "  failed = " << (res.rows.size() - res.succeeded) << "\n";
  for (const TrialRow& r : res.rows)
    if (r.failed) out << "  trial " << r.trial << " failed: " << r.reason << "\n";
  out << "  results_sha256 = " << csv_sha << "\n";
  return out.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << text;
}

}  // namespace

void ExperimentConfig::validate() const {
  learner_kind(learner);  // throws on unknown names
  if (trials < 1) throw Error("trials must be >= 1");
  if (m < 1) throw Error("m must be >= 1");
  if (!(sigma > 0.0)) throw Error("sigma must be > 0");
  if (!(rho >= 0.0)) throw Error("rho must be >= 0");
  if (!(sigma2 > 0.0)) throw Error("sigma2 must be > 0");
  if (!(lambda >= 0.0)) throw Error("lambda must be >= 0");
  if (q < 1) throw Error("q must be >= 1");
  if (!(train_frac > 0.0 && train_frac < 1.0))
    throw Error("train_frac must be inside (0, 1)");
  if (threads < 1) throw Error("threads must be >= 1");
  if (kernel != "rbf" && kernel != "linear")
    throw Error("kernel must be rbf or linear");
  if (!(gamma >= 0.0)) throw Error("gamma must be >= 0");
  if (!dataset.empty()) schema_by_name(schema);  // throws on unknown names
}

RunResult run(const ExperimentConfig& config) {
  config.validate();
  ModelKind kind = learner_kind(config.learner);
  fs::create_directories(config.out_dir);
  std::string split_dir = (fs::path(config.out_dir) / "splits").string();
  fs::create_directories(split_dir);

  Dataset ds;
  std::string dataset_sha;
  if (config.dataset.empty()) {
    ds = synth_biased(config.synth_n, config.synth_p, config.synth_bias,
                      rng::stream_seed(config.seed, "synth-data"));
  } else {
    LoadReport rep = load_csv(config.dataset, schema_by_name(config.schema));
    ds = std::move(rep.dataset);
    dataset_sha = sha256_file_hex(config.dataset);
  }

  TrialContext ctx{config, ds, kind, split_dir};
  std::vector<TrialRow> rows(static_cast<std::size_t>(config.trials));
  if (config.threads <= 1) {
    for (long t = 0; t < config.trials; ++t)
      rows[static_cast<std::size_t>(t)] = run_trial(ctx, static_cast<int>(t));
  } else {
    std::atomic<long> next{0};
    auto worker = [&] {
      for (;;) {
        long t = next.fetch_add(1);
        if (t >= config.trials) break;
        rows[static_cast<std::size_t>(t)] =
            run_trial(ctx, static_cast<int>(t));
      }
    };
    std::vector<std::thread> pool;
    for (int i = 0; i < config.threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  RunResult res;
  res.rows = std::move(rows);

  std::array<std::vector<double>, 7> cols;
  for (const TrialRow& r : res.rows) {
    if (r.failed) continue;
    const MetricsReport& m = r.metrics;
    double vals[7] = {static_cast<double>(r.k), m.sp, m.nd,
                      m.classifier_error,       m.error_parity,
                      m.error_disparate,        m.cov_fs};
    for (int i = 0; i < 7; ++i) cols[static_cast<std::size_t>(i)].push_back(vals[i]);
  }
  res.succeeded = static_cast<long>(cols[0].size());
  double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < 7; ++i) {
    if (cols[i].empty()) {
      res.mean[i] = nan;
      res.stdev[i] = nan;
      continue;
    }
    Eigen::Map<const Eigen::VectorXd> v(cols[i].data(),
                                        static_cast<Eigen::Index>(cols[i].size()));
    res.mean[i] = stats::mean(v);
    res.stdev[i] = v.size() >= 2 ? stats::sample_std(v) : nan;
  }

  std::string csv = results_csv(res);
  res.results_csv_path = (fs::path(config.out_dir) / "results.csv").string();
  write_text(res.results_csv_path, csv);
  std::string csv_sha = sha256_hex(std::span(
      reinterpret_cast<const uint8_t*>(csv.data()), csv.size()));
  res.manifest_path = (fs::path(config.out_dir) / "manifest.txt").string();
  write_text(res.manifest_path, manifest_text(config, dataset_sha, res, csv_sha));
  return res;
}

std::vector<SweepPoint> sweep_rho(const ExperimentConfig& config,
                                  const std::vector<double>& rho_grid) {
  if (rho_grid.empty()) throw Error("empty rho grid");
  fs::create_directories(config.out_dir);
  std::vector<SweepPoint> out;
  std::ostringstream csv;
  csv << "rho,mean_sp,mean_err,mean_k,failed\n";
  for (double rho : rho_grid) {
    ExperimentConfig c = config;
    c.rho = rho;
    c.soft = false;
    // Same master seed at every point: trial t reuses the same split and
    // hypothesis draw across the grid, so points differ only through rho.
    char sub[64];
    std::snprintf(sub, sizeof(sub), "rho_%g", rho);
    c.out_dir = (fs::path(config.out_dir) / sub).string();
    RunResult res = run(c);
    SweepPoint pt;
    pt.rho = rho;
    pt.mean_sp = res.mean[1];
    pt.mean_err = res.mean[3];
    pt.mean_k = res.mean[0];
    pt.failed = static_cast<long>(res.rows.size()) - res.succeeded;
    out.push_back(pt);
    csv << fmt(rho) << "," << fmt(pt.mean_sp) << "," << fmt(pt.mean_err)
        << "," << fmt(pt.mean_k) << "," << pt.failed << "\n";
  }
  write_text((fs::path(config.out_dir) / "sweep.csv").string(), csv.str());
  return out;
}

CovSignResult cov_sign_diagnostic(ExperimentConfig config, long trials) {
  if (trials > 0) config.trials = trials;
  RunResult res = run(config);
  CovSignResult out;
  std::ostringstream csv;
  csv << "trial,cov_fs\n";
  long positive = 0;
  for (const TrialRow& r : res.rows) {
    if (r.failed) continue;
    out.cov.push_back(r.metrics.cov_fs);
    if (r.metrics.cov_fs > 0.0) ++positive;
    csv << r.trial << "," << fmt(r.metrics.cov_fs) << "\n";
  }
  out.fraction_positive =
      out.cov.empty() ? 0.0
                      : static_cast<double>(positive) /
                            static_cast<double>(out.cov.size());
  csv << "fraction_positive," << fmt(out.fraction_positive) << "\n";
  write_text((fs::path(config.out_dir) / "cov_sign.csv").string(), csv.str());
  return out;
}

bool validate_theory(const std::string& which, uint64_t seed,
                     long trials_override, const std::string& out_dir) {
  auto canon = [](const std::string& w) -> std::string {
    if (w == "span-fair" || w == "lemma2") return "span-fair";
    if (w == "fair-count" || w == "lemma3") return "fair-count";
    if (w == "distortion" || w == "lemma5") return "distortion";
    if (w == "sp-bound" || w == "theorem4") return "sp-bound";
    if (w == "all") return "all";
    throw Error("unknown validator: " + w);
  };
  std::vector<std::string> names;
  if (canon(which) == "all")
    names = {"span-fair", "fair-count", "distortion", "sp-bound"};
  else
    names = {canon(which)};

  fs::create_directories(out_dir);
  std::ostringstream csv;
  csv << BoundReport::csv_header() << "\n";
  bool all_ok = true;
  for (const std::string& name : names) {
    BoundReport rep;
    if (name == "span-fair") {
      SpanFairnessParams p;
      p.seed = seed;
      if (trials_override > 0) p.trials = trials_override;
      rep = validate_span_fairness(p);
    } else if (name == "fair-count") {
      FairCountParams p;
      p.seed = seed;
      if (trials_override > 0) p.trials = trials_override;
      rep = validate_fair_count(p);
    } else if (name == "distortion") {
      DistortionParams p;
      p.seed = seed;
      if (trials_override > 0) p.trials = trials_override;
      rep = validate_distortion(p);
    } else {
      SpBoundParams p;
      p.seed = seed;
      if (trials_override > 0) p.trials = trials_override;
      rep = validate_sp_bound(p);
    }
    all_ok = all_ok && rep.passed;
    std::string text = rep.to_text();
    write_text((fs::path(out_dir) / (name + ".txt")).string(), text);
    std::fputs(text.c_str(), stdout);
    std::fputs("\n", stdout);
    csv << rep.csv_row() << "\n";
  }
  write_text((fs::path(out_dir) / "validators.csv").string(), csv.str());
  return all_ok;
}

}  // namespace dfl

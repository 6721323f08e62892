// Command-line driver: run experiments, sweep the fairness threshold,
// check the covariance-sign diagnostic, validate the theoretical bounds,
// and host the third-party fairness service.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "dfl/dataset.hpp"
#include "dfl/errors.hpp"
#include "dfl/harness.hpp"
#include "dfl/protocol.hpp"
#include "dfl/rng.hpp"

namespace {

volatile std::sig_atomic_t g_stop = 0;
void handle_signal(int) { g_stop = 1; }

void add_experiment_options(CLI::App* cmd, dfl::ExperimentConfig& cfg) {
  cmd->add_option("--dataset", cfg.dataset,
                  "CSV dataset path; empty uses the synthetic generator")
      ->capture_default_str();
  cmd->add_option("--schema", cfg.schema, "dataset schema preset")
      ->check(CLI::IsMember({"community-crime", "compas", "credit-card"}))
      ->capture_default_str();
  cmd->add_option("--synth-n", cfg.synth_n, "synthetic sample count")
      ->capture_default_str();
  cmd->add_option("--synth-p", cfg.synth_p, "synthetic feature count")
      ->capture_default_str();
  cmd->add_option("--synth-bias", cfg.synth_bias,
                  "synthetic group leakage in [0,1]")
      ->capture_default_str();
  cmd->add_option("--learner", cfg.learner, "model kind")
      ->check(CLI::IsMember(
          {"dfrr", "dfkrr", "dfgr", "dfpca", "ridge", "logistic", "pca"}))
      ->capture_default_str();
  cmd->add_option("--m", cfg.m, "hypotheses drawn per trial")
      ->capture_default_str();
  cmd->add_option("--sigma", cfg.sigma, "hypothesis weight std")
      ->capture_default_str();
  cmd->add_option("--rho", cfg.rho, "hard policy covariance threshold")
      ->capture_default_str();
  cmd->add_flag("--soft", cfg.soft, "use the soft acceptance policy");
  cmd->add_option("--sigma2", cfg.sigma2, "soft policy width")
      ->capture_default_str();
  cmd->add_option("--lambda", cfg.lambda, "ridge / logistic regularizer")
      ->capture_default_str();
  cmd->add_option("--q", cfg.q, "projection dimension (dfpca, pca)")
      ->capture_default_str();
  cmd->add_option("--kernel", cfg.kernel, "dfkrr kernel: rbf or linear")
      ->capture_default_str();
  cmd->add_option("--gamma", cfg.gamma,
                  "rbf width; 0 uses the median pairwise distance")
      ->capture_default_str();
  cmd->add_option("--trials", cfg.trials, "number of trials")
      ->capture_default_str();
  cmd->add_option("--train-frac", cfg.train_frac, "train fraction per split")
      ->capture_default_str();
  cmd->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  cmd->add_option("--tp-addr", cfg.tp_addr,
                  "third party: inproc, loopback, or host:port")
      ->envname("DFL_TP_ADDR")
      ->capture_default_str();
  cmd->add_option("--out-dir", cfg.out_dir, "output directory")
      ->capture_default_str();
  cmd->add_option("--threads", cfg.threads, "worker threads over trials")
      ->capture_default_str();
  cmd->set_config("--config", "",
                  "key=value config file; flags override file values");
}

void print_run(const dfl::RunResult& res) {
  std::printf("wrote %s\n", res.results_csv_path.c_str());
  std::printf("trials: %ld/%zu succeeded\n", res.succeeded, res.rows.size());
  if (res.succeeded > 0) {
    static const char* names[7] = {"k",  "sp", "nd",    "err",
                                   "ep", "ed", "cov_fs"};
    for (int i = 0; i < 7; ++i)
      std::printf("  %-6s = %.6g +/- %.6g\n", names[i],
                  res.mean[static_cast<std::size_t>(i)],
                  res.stdev[static_cast<std::size_t>(i)]);
  }
  for (const dfl::TrialRow& r : res.rows)
    if (r.failed)
      std::printf("  trial %d failed: %s\n", r.trial, r.reason.c_str());
}

std::pair<std::string, uint16_t> parse_bind(const std::string& addr) {
  std::size_t pos = addr.rfind(':');
  if (pos == std::string::npos || pos == 0 || pos + 1 == addr.size())
    throw dfl::Error("bind address must be host:port");
  int port = std::stoi(addr.substr(pos + 1));
  if (port < 0 || port > 65535) throw dfl::Error("port out of range");
  return {addr.substr(0, pos), static_cast<uint16_t>(port)};
}

int serve_tp(const dfl::ExperimentConfig& cfg, const std::string& bind,
             const std::string& split_dir) {
  dfl::Dataset ds;
  if (cfg.dataset.empty()) {
    ds = dfl::synth_biased(cfg.synth_n, cfg.synth_p, cfg.synth_bias,
                           dfl::rng::stream_seed(cfg.seed, "synth-data"));
  } else {
    ds = dfl::load_csv(cfg.dataset, dfl::schema_by_name(cfg.schema)).dataset;
  }
  // Same derivation the in-process path uses, so a client with the same
  // master seed sees identical soft-policy draws.
  dfl::proto::TpServer server(ds.sensitive,
                              dfl::rng::stream_seed(cfg.seed, "tp"));
  if (!split_dir.empty()) server.set_split_dir(split_dir);
  auto [host, port] = parse_bind(bind);
  uint16_t bound = server.start(host, port);
  std::printf("third-party service listening on %s:%u\n", host.c_str(),
              bound);
  std::fflush(stdout);
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  while (!g_stop)
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  server.stop();
  std::printf("sessions served: %llu\n",
              static_cast<unsigned long long>(server.sessions_served()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed fair learning"};
  app.require_subcommand(1);

  dfl::ExperimentConfig cfg;

  CLI::App* cmd_run = app.add_subcommand("run", "multi-trial experiment");
  add_experiment_options(cmd_run, cfg);

  CLI::App* cmd_sweep =
      app.add_subcommand("sweep-rho", "experiment per rho grid point");
  add_experiment_options(cmd_sweep, cfg);
  std::vector<double> rho_grid;
  cmd_sweep->add_option("--rho-grid", rho_grid, "rho values")
      ->required()
      ->delimiter(',');

  CLI::App* cmd_cov =
      app.add_subcommand("cov-sign", "signed cov(f(x), s) per trial");
  add_experiment_options(cmd_cov, cfg);

  CLI::App* cmd_val =
      app.add_subcommand("validate-theory", "Monte Carlo bound validators");
  std::string which = "all";
  uint64_t val_seed = 1;
  long val_trials = 0;
  std::string val_out = "out/theory";
  cmd_val
      ->add_option("which", which,
                   "span-fair | fair-count | distortion | sp-bound | all")
      ->capture_default_str();
  cmd_val->add_option("--seed", val_seed, "validator seed")
      ->capture_default_str();
  cmd_val->add_option("--trials", val_trials, "override trial count (0: keep)")
      ->capture_default_str();
  cmd_val->add_option("--out-dir", val_out, "report directory")
      ->capture_default_str();

  CLI::App* cmd_serve =
      app.add_subcommand("serve-tp", "host the third-party fairness service");
  add_experiment_options(cmd_serve, cfg);
  std::string bind = "127.0.0.1:7707";
  std::string split_dir;
  cmd_serve->add_option("--bind", bind, "host:port; port 0 picks one")
      ->capture_default_str();
  cmd_serve->add_option("--split-dir", split_dir,
                        "directory of persisted train-index files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(cmd_run)) {
      print_run(dfl::run(cfg));
      return 0;
    }
    if (app.got_subcommand(cmd_sweep)) {
      std::vector<dfl::SweepPoint> pts = dfl::sweep_rho(cfg, rho_grid);
      std::printf("%-10s %-12s %-12s %-10s %s\n", "rho", "mean_sp",
                  "mean_err", "mean_k", "failed");
      for (const dfl::SweepPoint& pt : pts)
        std::printf("%-10g %-12.6g %-12.6g %-10.6g %ld\n", pt.rho, pt.mean_sp,
                    pt.mean_err, pt.mean_k, pt.failed);
      std::printf("wrote %s/sweep.csv\n", cfg.out_dir.c_str());
      return 0;
    }
    if (app.got_subcommand(cmd_cov)) {
      dfl::CovSignResult res = dfl::cov_sign_diagnostic(cfg, 0);
      std::printf("trials with cov(f,s) > 0: %.4g (%zu total)\n",
                  res.fraction_positive, res.cov.size());
      std::printf("wrote %s/cov_sign.csv\n", cfg.out_dir.c_str());
      return 0;
    }
    if (app.got_subcommand(cmd_val))
      return dfl::validate_theory(which, val_seed, val_trials, val_out) ? 0
                                                                        : 1;
    if (app.got_subcommand(cmd_serve)) return serve_tp(cfg, bind, split_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

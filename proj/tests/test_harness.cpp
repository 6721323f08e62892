#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfl/errors.hpp"
#include "dfl/harness.hpp"
#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

dfl::ExperimentConfig tiny_config(const std::string& out_dir) {
  dfl::ExperimentConfig cfg;
  cfg.synth_n = 200;
  cfg.synth_p = 5;
  cfg.synth_bias = 0.5;
  cfg.m = 80;
  cfg.rho = 0.12;
  cfg.lambda = 0.1;
  cfg.trials = 3;
  cfg.seed = 17;
  cfg.out_dir = out_dir;
  return cfg;
}

}  // namespace

TEST_CASE("repeated runs write byte-identical results") {
  std::string dir = (fs::temp_directory_path() / "dfl_h1").string();
  fs::remove_all(dir);
  dfl::ExperimentConfig cfg = tiny_config(dir);
  dfl::RunResult a = dfl::run(cfg);
  std::string first = slurp(a.results_csv_path);
  dfl::RunResult b = dfl::run(cfg);
  CHECK(first == slurp(b.results_csv_path));
  CHECK(!first.empty());
  CHECK(a.succeeded == 3);
  fs::remove_all(dir);
}

TEST_CASE("in-process and loopback third parties give identical csv bytes") {
  std::string d1 = (fs::temp_directory_path() / "dfl_h2a").string();
  std::string d2 = (fs::temp_directory_path() / "dfl_h2b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  dfl::ExperimentConfig cfg = tiny_config(d1);
  dfl::RunResult a = dfl::run(cfg);
  cfg.out_dir = d2;
  cfg.tp_addr = "loopback";
  dfl::RunResult b = dfl::run(cfg);
  CHECK(slurp(a.results_csv_path) == slurp(b.results_csv_path));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("per-trial split files and the manifest are written") {
  std::string dir = (fs::temp_directory_path() / "dfl_h3").string();
  fs::remove_all(dir);
  dfl::ExperimentConfig cfg = tiny_config(dir);
  dfl::RunResult res = dfl::run(cfg);
  CHECK(fs::exists(res.manifest_path));
  std::string manifest = slurp(res.manifest_path);
  CHECK(manifest.find("seed = 17") != std::string::npos);
  CHECK(manifest.find("learner = dfrr") != std::string::npos);
  CHECK(manifest.find("results_sha256 = ") != std::string::npos);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir + "/splits")) {
    CHECK(e.path().extension() == ".idx");
    ++files;
  }
  CHECK(files == 3);
  fs::remove_all(dir);
}

TEST_CASE("csv layout: header, one row per trial, then mean and std") {
  std::string dir = (fs::temp_directory_path() / "dfl_h4").string();
  fs::remove_all(dir);
  dfl::RunResult res = dfl::run(tiny_config(dir));
  std::istringstream csv(slurp(res.results_csv_path));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "trial,k,sp,nd,err,ep,ed,cov_fs");
  int rows = 0;
  bool saw_mean = false, saw_std = false;
  while (std::getline(csv, line)) {
    if (line.rfind("mean,", 0) == 0) saw_mean = true;
    else if (line.rfind("std,", 0) == 0) saw_std = true;
    else ++rows;
  }
  CHECK(rows == 3);
  CHECK(saw_mean);
  CHECK(saw_std);
  fs::remove_all(dir);
}

TEST_CASE("an impossible threshold yields failed trials, not a crash") {
  std::string dir = (fs::temp_directory_path() / "dfl_h5").string();
  fs::remove_all(dir);
  dfl::ExperimentConfig cfg = tiny_config(dir);
  cfg.soft = true;
  cfg.sigma2 = 1e-12;  // rejects every hypothesis
  dfl::RunResult res = dfl::run(cfg);
  CHECK(res.succeeded == 0);
  for (const dfl::TrialRow& r : res.rows) {
    CHECK(r.failed);
    CHECK(r.reason == "empty fair set");
  }
  std::string csv = slurp(res.results_csv_path);
  CHECK(csv.find("nan") != std::string::npos);
  CHECK(csv.find("mean,") == std::string::npos);  // no summary over nothing
  fs::remove_all(dir);
}

TEST_CASE("baselines skip the third party entirely") {
  std::string dir = (fs::temp_directory_path() / "dfl_h6").string();
  fs::remove_all(dir);
  dfl::ExperimentConfig cfg = tiny_config(dir);
  cfg.learner = "ridge";
  cfg.tp_addr = "127.0.0.1:9";  // would fail instantly if contacted
  dfl::RunResult res = dfl::run(cfg);
  CHECK(res.succeeded == 3);
  fs::remove_all(dir);
}

TEST_CASE("the rho sweep shares trial seeds across grid points") {
  std::string dir = (fs::temp_directory_path() / "dfl_h7").string();
  fs::remove_all(dir);
  dfl::ExperimentConfig cfg = tiny_config(dir);
  cfg.trials = 2;
  std::vector<dfl::SweepPoint> pts = dfl::sweep_rho(cfg, {0.05, 0.3});
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].mean_k <= pts[1].mean_k);  // looser threshold keeps more
  CHECK(fs::exists(dir + "/sweep.csv"));
  // per-point results live in their own subdirectories
  CHECK(fs::exists(dir + "/rho_0.05/results.csv"));
  CHECK(fs::exists(dir + "/rho_0.3/results.csv"));
  fs::remove_all(dir);
}

TEST_CASE("a single-point grid reproduces a plain run") {
  std::string d1 = (fs::temp_directory_path() / "dfl_h10a").string();
  std::string d2 = (fs::temp_directory_path() / "dfl_h10b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  dfl::ExperimentConfig cfg = tiny_config(d1);
  dfl::RunResult direct = dfl::run(cfg);
  cfg.out_dir = d2;
  std::vector<dfl::SweepPoint> pts = dfl::sweep_rho(cfg, {cfg.rho});
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].mean_sp == direct.mean[1]);
  CHECK(pts[0].mean_err == direct.mean[3]);
  CHECK(pts[0].mean_k == direct.mean[0]);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("filtering at a tight threshold beats plain ridge on parity") {
  std::string d1 = (fs::temp_directory_path() / "dfl_h11a").string();
  std::string d2 = (fs::temp_directory_path() / "dfl_h11b").string();
  fs::remove_all(d1);
  fs::remove_all(d2);
  dfl::ExperimentConfig cfg;
  cfg.synth_n = 600;
  cfg.synth_p = 12;
  cfg.synth_bias = 1.0;  // strongest group leakage the generator allows
  cfg.m = 400;
  cfg.rho = 0.005;  // keeps the fair span well below the feature dimension
  cfg.lambda = 0.1;
  cfg.trials = 50;
  cfg.seed = 3;
  cfg.out_dir = d1;
  cfg.learner = "dfrr";
  dfl::RunResult fair = dfl::run(cfg);
  cfg.out_dir = d2;
  cfg.learner = "ridge";
  dfl::RunResult plain = dfl::run(cfg);
  REQUIRE(fair.rows.size() == plain.rows.size());
  int strictly_smaller = 0;
  for (size_t i = 0; i < fair.rows.size(); ++i) {
    if (fair.rows[i].failed || plain.rows[i].failed) continue;
    if (fair.rows[i].metrics.sp < plain.rows[i].metrics.sp)
      ++strictly_smaller;
  }
  CHECK(strictly_smaller >= 45);  // paired by shared split seeds
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("cov-sign diagnostic reports the positive fraction") {
  std::string dir = (fs::temp_directory_path() / "dfl_h8").string();
  fs::remove_all(dir);
  dfl::ExperimentConfig cfg = tiny_config(dir);
  dfl::CovSignResult res = dfl::cov_sign_diagnostic(cfg, 4);
  CHECK(res.cov.size() == 4);
  CHECK(res.fraction_positive >= 0.0);
  CHECK(res.fraction_positive <= 1.0);
  CHECK(fs::exists(dir + "/cov_sign.csv"));
  fs::remove_all(dir);
}

TEST_CASE("validator names and their aliases dispatch the same way") {
  std::string dir = (fs::temp_directory_path() / "dfl_h9").string();
  fs::remove_all(dir);
  CHECK(dfl::validate_theory("span-fair", 3, 40, dir));
  CHECK(fs::exists(dir + "/span-fair.txt"));
  CHECK(dfl::validate_theory("lemma2", 3, 40, dir));
  CHECK(dfl::validate_theory("lemma3", 3, 30, dir));
  CHECK(fs::exists(dir + "/fair-count.txt"));
  CHECK(fs::exists(dir + "/validators.csv"));
  CHECK_THROWS_AS(dfl::validate_theory("bogus", 1, 10, dir), dfl::Error);
  fs::remove_all(dir);
}

TEST_CASE("config validation rejects out-of-range values") {
  dfl::ExperimentConfig cfg;
  cfg.trials = 0;
  CHECK_THROWS_AS(cfg.validate(), dfl::Error);
  cfg = {};
  cfg.learner = "nope";
  CHECK_THROWS_AS(cfg.validate(), dfl::Error);
  cfg = {};
  cfg.train_frac = 1.0;
  CHECK_THROWS_AS(cfg.validate(), dfl::Error);
  cfg = {};
  cfg.kernel = "poly";
  CHECK_THROWS_AS(cfg.validate(), dfl::Error);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "dfl/errors.hpp"
#include "dfl/theory.hpp"
#include "doctest.h"

TEST_CASE("sp_bound spot values and scaling") {
  CHECK(dfl::sp_bound(1, 1.0, 0.01, 0.5, 0.5) ==
        doctest::Approx(0.04).epsilon(1e-12));
  CHECK(dfl::sp_bound(4, 0.5, 0.1, 0.5, 0.5) ==
        doctest::Approx(0.4).epsilon(1e-12));
  // linear in rho, sqrt in k
  CHECK(dfl::sp_bound(1, 1.0, 0.02, 0.5, 0.5) ==
        doctest::Approx(0.08).epsilon(1e-12));
  CHECK(dfl::sp_bound(4, 1.0, 0.01, 0.5, 0.5) ==
        doctest::Approx(0.08).epsilon(1e-12));
  // unbalanced groups inflate the ceiling
  CHECK(dfl::sp_bound(1, 1.0, 0.01, 0.1, 0.9) ==
        doctest::Approx(0.01 / 0.09).epsilon(1e-12));
  CHECK_THROWS_AS(dfl::sp_bound(1, 1.0, 0.01, 0.0, 1.0), dfl::Error);
  CHECK_THROWS_AS(dfl::sp_bound(1, 1.0, 0.01, 0.3, 0.6), dfl::Error);
}

TEST_CASE("k_bound_linear spot values and clamping") {
  CHECK(dfl::k_bound_linear(100, 1.0, 0.1, 0.2) ==
        doctest::Approx(75.0).epsilon(1e-12));
  // rho below the noise floor clamps at zero instead of going negative
  CHECK(dfl::k_bound_linear(100, 1.0, 0.5, 0.2) == 0.0);
  CHECK(dfl::k_bound_linear(100, 0.0, 0.5, 0.2) == 100.0);
  CHECK_THROWS_AS(dfl::k_bound_linear(100, 1.0, 0.1, 0.0), dfl::Error);
}

TEST_CASE("distortion_bound centered value and monotonicity") {
  // At <h*,x> = 0 the prefactor is exactly 2.
  CHECK(dfl::distortion_bound(0.5, 64, 0.0) ==
        doctest::Approx(2.0 * std::exp(-2.0)).epsilon(1e-15));
  CHECK(std::abs(dfl::distortion_bound(0.5, 64, 0.0) - 0.27067) < 1e-5);

  double prev = 10.0;
  for (double k : {8.0, 16.0, 32.0, 64.0, 128.0}) {
    double b = dfl::distortion_bound(0.5, k, 0.0);
    CHECK(b < prev);
    prev = b;
  }
  // a nonzero center costs an exponential factor but stays finite
  CHECK(dfl::distortion_bound(0.5, 16, 0.3) >
        dfl::distortion_bound(0.5, 16, 0.0));
  CHECK_THROWS_AS(dfl::distortion_bound(1.0, 16, 0.0), dfl::Error);
  CHECK_THROWS_AS(dfl::distortion_bound(-0.1, 16, 0.0), dfl::Error);
}

TEST_CASE("complexity term matches its formula") {
  // frozen reference value, recomputed here from first principles
  double n = 1000, k = 9, delta = 0.05;
  double expect = 2.0 * std::sqrt(((k + 1) * std::log(std::exp(1.0) * n /
                                                      (k + 1)) +
                                   std::log(1.0 / delta)) /
                                  n);
  CHECK(dfl::complexity_term(n, k, delta) ==
        doctest::Approx(expect).epsilon(1e-14));
  CHECK(std::abs(dfl::complexity_term(1000, 9, 0.05) - 0.48599355606194983) <
        1e-12);
  // more samples tighten, more hypotheses loosen
  CHECK(dfl::complexity_term(4000, 9, 0.05) <
        dfl::complexity_term(1000, 9, 0.05));
  CHECK(dfl::complexity_term(1000, 20, 0.05) >
        dfl::complexity_term(1000, 9, 0.05));
}

TEST_CASE("generalization bound reduces to a hand value on flat inners") {
  // With <f,x_i> = 0 every tail term is g * 1 with g = 2, so the bound is
  // emp + complexity + 8/delta.
  Eigen::Index n = 50;
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(n);
  double delta = 0.2;
  double got = dfl::generalization_bound(0.1, n, 5, delta, zero, zero);
  double expect = 0.1 + dfl::complexity_term(n, 5, delta) + 8.0 / delta;
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
  CHECK_THROWS_AS(dfl::generalization_bound(0.1, n, 5, 0.3, zero, zero),
                  dfl::Error);  // delta must be < 1/4
}

TEST_CASE("span fairness validator finds no violations") {
  dfl::SpanFairnessParams p;
  p.trials = 120;
  p.seed = 5;
  dfl::BoundReport rep = dfl::validate_span_fairness(p);
  CHECK(rep.passed);
  CHECK(rep.violation_rate == 0.0);
  CHECK(rep.trials == 120);
  CHECK(rep.empirical_value < 0.0);  // max slack stays below the ceiling
}

TEST_CASE("fair count validator clears its floor with room") {
  dfl::FairCountParams p;
  p.trials = 50;
  p.seed = 6;
  dfl::BoundReport rep = dfl::validate_fair_count(p);
  CHECK(rep.passed);
  CHECK(rep.empirical_value >= rep.bound_value);
  CHECK_FALSE(rep.vacuous);
}

TEST_CASE("distortion validator clears every grid point") {
  dfl::DistortionParams p;
  p.trials = 2000;
  p.seed = 7;
  dfl::BoundReport rep = dfl::validate_distortion(p);
  CHECK(rep.passed);
  CHECK(rep.detail.size() == p.c_grid.size());
}

TEST_CASE("sp bound validator stays within its violation budget") {
  dfl::SpBoundParams p;
  p.trials = 60;
  p.seed = 8;
  dfl::BoundReport rep = dfl::validate_sp_bound(p);
  CHECK(rep.passed);
  CHECK(rep.violation_rate <= 0.05);
  CHECK(rep.parameters.at("positive_cov_fraction") >= 0.8);
}

TEST_CASE("bound reports serialize to text and csv") {
  dfl::SpanFairnessParams p;
  p.trials = 10;
  dfl::BoundReport rep = dfl::validate_span_fairness(p);
  std::string text = rep.to_text();
  CHECK(text.find("span-fairness") != std::string::npos);
  CHECK(text.find("passed") != std::string::npos);
  CHECK(dfl::BoundReport::csv_header().find("violation_rate") !=
        std::string::npos);
  CHECK(!rep.csv_row().empty());
}

#include <doctest.h>

#include <cmath>

#include "ssfl/rng.hpp"
#include "ssfl/weighting.hpp"

using namespace ssfl;

namespace {
DenseArray pvec(std::initializer_list<double> vals) {
  std::vector<double> v(vals);
  return DenseArray({v.size()}, v);
}
}  // namespace

TEST_CASE("sample weight: full weight at or above the running mean") {
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.8;
  ema.variance = 0.02;
  WeightingConfig cfg{1.0};
  CHECK(sample_weight(pvec({0.05, 0.05, 0.9}), ema, cfg) == 1.0);
}

TEST_CASE("sample weight: Laplace decay below the mean, exp(-2) reference point") {
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.8;
  ema.variance = 0.02;  // b = sqrt(0.02/2) = 0.1
  WeightingConfig cfg{1.0};
  double w = sample_weight(pvec({0.2, 0.2, 0.6}), ema, cfg);
  CHECK(w == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
  CHECK(w == doctest::Approx(0.1353352832366127).epsilon(1e-9));
}

TEST_CASE("sample weight is continuous at the mean") {
  ConfidenceEMA ema(4, 0.999);
  ema.mean = 0.7;
  ema.variance = 0.05;
  WeightingConfig cfg{2.5};
  double just_below = sample_weight_from_conf(0.7 - 1e-12, ema, cfg);
  double at_mean = sample_weight_from_conf(0.7, ema, cfg);
  CHECK(at_mean == 2.5);
  CHECK(just_below == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("sample weight is nondecreasing in the max probability") {
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.75;
  ema.variance = 0.1;
  WeightingConfig cfg{1.0};
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    double a = rng.uniform(1.0 / 3.0, 1.0);
    double b = rng.uniform(1.0 / 3.0, 1.0);
    if (a > b) std::swap(a, b);
    CHECK(sample_weight_from_conf(a, ema, cfg) <= sample_weight_from_conf(b, ema, cfg));
  }
}

TEST_CASE("degenerate scale falls back to a hard threshold and is flagged") {
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.6;
  ema.variance = 0.0;
  WeightingConfig cfg{1.0};
  CHECK(sample_weight_from_conf(0.59, ema, cfg) == 0.0);
  CHECK(sample_weight_from_conf(0.61, ema, cfg) == 1.0);
  CHECK(ema.degenerate_logged);
}

TEST_CASE("sample weight validates its probability input") {
  ConfidenceEMA ema(3, 0.999);
  WeightingConfig cfg{1.0};
  CHECK_THROWS_AS(sample_weight(pvec({0.5, 0.2, 0.2}), ema, cfg), std::invalid_argument);
  CHECK_THROWS_AS(sample_weight(pvec({-0.1, 0.6, 0.5}), ema, cfg), std::invalid_argument);
}

TEST_CASE("batch stats: constant batch") {
  auto s = batch_confidence_stats_from_conf({0.7, 0.7, 0.7});
  CHECK(s.mean == doctest::Approx(0.7));
  CHECK(s.variance == doctest::Approx(0.0));
}

TEST_CASE("batch stats: biased variance on {0.5, 0.9}") {
  auto s = batch_confidence_stats_from_conf({0.5, 0.9});
  CHECK(s.mean == doctest::Approx(0.7));
  CHECK(s.variance == doctest::Approx(0.04));
}

TEST_CASE("batch stats: single element") {
  auto s = batch_confidence_stats_from_conf({0.42});
  CHECK(s.mean == doctest::Approx(0.42));
  CHECK(s.variance == 0.0);
  CHECK(s.batch == 1);
}

TEST_CASE("batch stats reject an empty batch") {
  CHECK_THROWS_AS(batch_confidence_stats_from_conf({}), std::invalid_argument);
}

TEST_CASE("ema: fresh state starts at 1/C and unit variance") {
  ConfidenceEMA ema(3, 0.999);
  CHECK(ema.mean == doctest::Approx(1.0 / 3.0));
  CHECK(ema.variance == 1.0);
  CHECK(ema.scale() == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("ema: zero momentum adopts the bias-corrected batch stats") {
  ConfidenceEMA ema(3, 0.0);
  auto s = batch_confidence_stats_from_conf({0.5, 0.9});
  ema_update(ema, s);
  CHECK(ema.mean == doctest::Approx(0.7));
  CHECK(ema.variance == doctest::Approx(0.04 * 2.0 / 1.0));  // unbiased correction
}

TEST_CASE("ema: full momentum keeps the state") {
  ConfidenceEMA ema(4, 1.0);
  double m0 = ema.mean, v0 = ema.variance;
  ema_update(ema, batch_confidence_stats_from_conf({0.9, 0.8}));
  CHECK(ema.mean == m0);
  CHECK(ema.variance == v0);
}

TEST_CASE("ema: single-sample batch updates the mean only") {
  ConfidenceEMA ema(3, 0.5);
  double v0 = ema.variance;
  ema_update(ema, batch_confidence_stats_from_conf({0.9}));
  CHECK(ema.variance == v0);
  CHECK(ema.mean == doctest::Approx(0.5 * (1.0 / 3.0) + 0.5 * 0.9));
}

TEST_CASE("ema update contracts toward the batch mean by exactly m") {
  Rng rng(6);
  for (int i = 0; i < 50; ++i) {
    double m = rng.uniform(0.0, 0.99);
    ConfidenceEMA ema(3, m);
    ema.mean = rng.uniform(0.2, 0.9);
    BatchStats s;
    s.mean = rng.uniform(0.2, 0.9);
    s.variance = rng.uniform(0.0, 0.1);
    s.batch = 8;
    double before = std::fabs(ema.mean - s.mean);
    ema_update(ema, s);
    CHECK(std::fabs(ema.mean - s.mean) == doctest::Approx(m * before).epsilon(1e-9));
  }
}

TEST_CASE("eta schedule hits the stated anchor points") {
  ScheduleConfig cfg;
  cfg.total_rounds = 100;
  cfg.eta_f = 3.0;
  cfg.t1_frac = 0.3;
  cfg.t2_frac = 0.7;
  CHECK(eta(10, cfg) == 0.0);
  CHECK(eta(50, cfg) == doctest::Approx(1.5));
  CHECK(eta(90, cfg) == doctest::Approx(3.0));
}

TEST_CASE("eta is nondecreasing and continuous over the round range") {
  ScheduleConfig cfg;
  cfg.total_rounds = 60;
  double prev = -1.0;
  for (double t = 0.0; t <= 60.0; t += 0.125) {
    double v = eta(t, cfg);
    CHECK(v >= prev);
    prev = v;
  }
  // continuity at the two knees
  CHECK(eta(cfg.t1() - 1e-9, cfg) == doctest::Approx(eta(cfg.t1() + 1e-9, cfg)).epsilon(1e-6));
  CHECK(eta(cfg.t2() - 1e-9, cfg) == doctest::Approx(eta(cfg.t2() + 1e-9, cfg)).epsilon(1e-6));
}

TEST_CASE("iota is the labeled fraction of the batch") {
  CHECK(iota(16, 16) == 1.0);
  CHECK(iota(0, 16) == 0.0);
  CHECK(iota(4, 16) == doctest::Approx(0.25));
  CHECK_THROWS_AS(iota(17, 16), std::invalid_argument);
  CHECK_THROWS_AS(iota(0, 0), std::invalid_argument);
}

TEST_CASE("pseudo labels: one-hot input, argmax with full weight") {
  ConfidenceEMA ema(3, 0.999);
  WeightingConfig cfg{1.0};
  auto pls = pseudo_labels({pvec({0.0, 0.0, 1.0})}, ema, cfg);
  REQUIRE(pls.size() == 1);
  CHECK(pls[0].label == 2);
  CHECK(pls[0].weight == 1.0);
}

TEST_CASE("pseudo labels: uniform vector ties break to the lowest class") {
  ConfidenceEMA ema(3, 0.999);
  WeightingConfig cfg{1.0};
  double third = 1.0 / 3.0;
  auto pls = pseudo_labels({pvec({third, third, third})}, ema, cfg);
  CHECK(pls[0].label == 0);
  // max(p) equals the fresh running mean, so the full-weight branch applies
  CHECK(pls[0].weight == 1.0);
}

TEST_CASE("pseudo labels match elementwise sample_weight") {
  ConfidenceEMA ema(4, 0.999);
  ema.mean = 0.7;
  ema.variance = 0.08;
  WeightingConfig cfg{1.0};
  std::vector<DenseArray> batch = {
      pvec({0.9, 0.05, 0.02, 0.03}), pvec({0.4, 0.3, 0.2, 0.1}),
      pvec({0.25, 0.26, 0.24, 0.25}), pvec({0.1, 0.1, 0.1, 0.7})};
  auto pls = pseudo_labels(batch, ema, cfg);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(pls[i].weight == doctest::Approx(sample_weight(batch[i], ema, cfg)).epsilon(1e-15));
  }
  CHECK(pls[0].label == 0);
  CHECK(pls[2].label == 1);
}

TEST_CASE("quantity oracle: all confident means lambda_max") {
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.5;
  ema.variance = 0.1;
  WeightingConfig cfg{1.0};
  std::vector<DenseArray> pool = {pvec({0.8, 0.1, 0.1}), pvec({0.1, 0.9, 0.0})};
  CHECK(quantity_oracle(pool, ema, cfg) == 1.0);
  CHECK_THROWS_AS(quantity_oracle({}, ema, cfg), std::invalid_argument);
}

TEST_CASE("quantity oracle: boundary pool sits just above lambda_max/2") {
  // half exactly at the mean (full weight), half far below with a small
  // scale so their weight is nearly zero
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.95;
  ema.variance = 0.005;  // b = 0.05 -> exp(-12) below
  WeightingConfig cfg{1.0};
  std::vector<DenseArray> pool;
  for (int i = 0; i < 8; ++i) pool.push_back(pvec({0.95, 0.03, 0.02}));
  for (int i = 0; i < 8; ++i) pool.push_back(pvec({0.35, 0.35, 0.30}));
  double f = quantity_oracle(pool, ema, cfg);
  CHECK(f > 0.5);
  CHECK(f < 0.501);
}

TEST_CASE("quality oracle: all correct / all incorrect") {
  ConfidenceEMA ema(3, 0.999);
  ema.mean = 0.5;
  ema.variance = 0.1;
  WeightingConfig cfg{1.0};
  std::vector<DenseArray> pool = {pvec({0.8, 0.1, 0.1}), pvec({0.1, 0.9, 0.0})};
  CHECK(quality_oracle(pool, {0, 1}, ema, cfg) == 1.0);
  CHECK(quality_oracle(pool, {1, 0}, ema, cfg) == 0.0);
}

TEST_CASE("bound verifier: zero violations on randomized pools") {
  BoundReport report = verify_weighting_bounds(200, 256, 3, 99);
  CHECK(report.trials == 200);
  CHECK(report.violations == 0);
}

TEST_CASE("bound check: degenerate all-above pool passes with f == lambda_max") {
  std::vector<double> maxes = {0.8, 0.85, 0.9, 0.95};
  std::vector<int> predicted = {0, 1, 2, 0};
  std::vector<int> truth = {0, 1, 1, 0};
  PoolCheck check = check_pool_bounds(maxes, predicted, truth, 0.7, 0.05, 3, 1.0);
  CHECK(check.violation.empty());
  CHECK(check.f == 1.0);
  CHECK(check.g >= check.g_bound);
}

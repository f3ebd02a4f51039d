#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfl/dense_array.hpp"

namespace ssfl {

// Running confidence statistics of max-probability predictions, one per
// client. Starts at mean 1/C and variance 1.0.
struct ConfidenceEMA {
  double mean = 0.0;
  double variance = 1.0;
  double momentum = 0.999;
  bool degenerate_logged = false;

  ConfidenceEMA() = default;
  ConfidenceEMA(int classes, double m)
      : mean(1.0 / static_cast<double>(classes)), variance(1.0), momentum(m) {}

  double scale() const;  // b = sqrt(variance / 2), recomputed on demand
  double stddev() const;
};

struct WeightingConfig {
  double lambda_max = 1.0;
};

struct ScheduleConfig {
  double total_rounds = 60;
  double eta_f = 3.0;
  double t1_frac = 0.3;
  double t2_frac = 0.7;

  double t1() const { return t1_frac * total_rounds; }
  double t2() const { return t2_frac * total_rounds; }
};

// Laplace-shaped weight: lambda_max at or above the running mean, decaying
// as exp(-|max(p) - mean| / b) below it. Degenerate scale falls back to a
// hard threshold at the mean.
double sample_weight(const DenseArray& p, ConfidenceEMA& ema, const WeightingConfig& cfg);
double sample_weight_from_conf(double max_prob, ConfidenceEMA& ema, const WeightingConfig& cfg);

// Batch mean and biased (divide-by-B) variance of max-probabilities.
struct BatchStats {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t batch = 0;
};
BatchStats batch_confidence_stats(const std::vector<DenseArray>& probs);
BatchStats batch_confidence_stats_from_conf(const std::vector<double>& max_probs);

// EMA update with unbiased variance correction B/(B-1); a single-sample
// batch updates the mean only.
void ema_update(ConfidenceEMA& ema, const BatchStats& stats);

double eta(double t, const ScheduleConfig& cfg);
double iota(std::size_t labeled_in_batch, std::size_t batch_size);

struct PseudoLabel {
  int label = 0;
  double weight = 0.0;
  double max_prob = 0.0;
};
// argmax labels (ties -> lowest class id) with Laplace weights.
std::vector<PseudoLabel> pseudo_labels(const std::vector<DenseArray>& probs,
                                       ConfidenceEMA& ema, const WeightingConfig& cfg);

// Quantity f(p): mean weight over an unlabeled pool.
double quantity_oracle(const std::vector<DenseArray>& probs, ConfidenceEMA& ema,
                       const WeightingConfig& cfg);

// Quality g(p): weight-normalized fraction of correct argmax labels.
double quality_oracle(const std::vector<DenseArray>& probs, const std::vector<int>& truth,
                      ConfidenceEMA& ema, const WeightingConfig& cfg);

// Brute-force verification of the quantity/quality bounds on randomized
// confidence pools built with half the pool strictly below the running mean
// (the regime the bounds are stated for).
struct BoundTrialFailure {
  std::size_t trial = 0;
  std::string reason;
  double f = 0.0;
  double lower_chain = 0.0;
  double g = 0.0;
  double g_bound = 0.0;
};

struct BoundReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  std::vector<BoundTrialFailure> failures;
  bool pass() const { return violations == 0; }
};

// One pool's worth of bound checks (exact inequalities, no tolerance).
// A pool entirely at or above the mean degenerates to f == lambda_max and
// counts as a pass. Returns the empty string on success.
struct PoolCheck {
  double f = 0.0;
  double lower_chain = 0.0;
  double g = 0.0;
  double g_bound = 0.0;
  std::string violation;  // empty when all inequalities hold
};
PoolCheck check_pool_bounds(const std::vector<double>& max_probs,
                            const std::vector<int>& predicted,
                            const std::vector<int>& truth, double mean,
                            double variance, int classes, double lambda_max);

BoundReport verify_weighting_bounds(std::size_t trials, std::size_t pool_size,
                                    int classes, std::uint64_t seed,
                                    double lambda_max = 1.0);

}  // namespace ssfl

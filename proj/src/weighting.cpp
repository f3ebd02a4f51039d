#include "ssfl/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ssfl/rng.hpp"

namespace ssfl {

double ConfidenceEMA::scale() const { return std::sqrt(variance / 2.0); }
double ConfidenceEMA::stddev() const { return std::sqrt(std::max(0.0, variance)); }

namespace {

double max_entry(const DenseArray& p) {
  double mx = p.data[0];
  for (double v : p.data) mx = std::max(mx, v);
  return mx;
}

int argmax_lowest_tie(const DenseArray& p) {
  int best = 0;
  for (std::size_t j = 1; j < p.size(); ++j)
    if (p.data[j] > p.data[best]) best = static_cast<int>(j);
  return best;
}

void check_probability(const DenseArray& p) {
  double total = 0.0;
  for (double v : p.data) {
    if (v < 0.0) throw std::invalid_argument("sample_weight: negative probability");
    total += v;
  }
  if (std::fabs(total - 1.0) > 1e-9)
    throw std::invalid_argument("sample_weight: probabilities sum to " + std::to_string(total));
}

}  // namespace

double sample_weight_from_conf(double max_prob, ConfidenceEMA& ema,
                               const WeightingConfig& cfg) {
  double b = ema.scale();
  if (b < 1e-12) {
    ema.degenerate_logged = true;
    return max_prob >= ema.mean ? cfg.lambda_max : 0.0;
  }
  if (max_prob >= ema.mean) return cfg.lambda_max;
  return cfg.lambda_max * std::exp(-std::fabs(max_prob - ema.mean) / b);
}

double sample_weight(const DenseArray& p, ConfidenceEMA& ema, const WeightingConfig& cfg) {
  check_probability(p);
  if (ema.variance < 0.0) throw std::invalid_argument("sample_weight: negative variance");
  return sample_weight_from_conf(max_entry(p), ema, cfg);
}

BatchStats batch_confidence_stats_from_conf(const std::vector<double>& max_probs) {
  if (max_probs.empty()) throw std::invalid_argument("batch_confidence_stats: empty batch");
  BatchStats s;
  s.batch = max_probs.size();
  for (double v : max_probs) s.mean += v;
  s.mean /= static_cast<double>(s.batch);
  for (double v : max_probs) s.variance += (v - s.mean) * (v - s.mean);
  s.variance /= static_cast<double>(s.batch);
  return s;
}

BatchStats batch_confidence_stats(const std::vector<DenseArray>& probs) {
  std::vector<double> maxes;
  maxes.reserve(probs.size());
  for (const auto& p : probs) maxes.push_back(max_entry(p));
  return batch_confidence_stats_from_conf(maxes);
}

void ema_update(ConfidenceEMA& ema, const BatchStats& stats) {
  double m = ema.momentum;
  ema.mean = m * ema.mean + (1.0 - m) * stats.mean;
  if (stats.batch > 1) {
    double unbiased = stats.variance * static_cast<double>(stats.batch) /
                      static_cast<double>(stats.batch - 1);
    ema.variance = m * ema.variance + (1.0 - m) * unbiased;
  }
}

double eta(double t, const ScheduleConfig& cfg) {
  if (t < 0.0 || t > cfg.total_rounds) throw std::invalid_argument("eta: round out of range");
  double t1 = cfg.t1(), t2 = cfg.t2();
  if (t < t1) return 0.0;
  if (t < t2) return cfg.eta_f * (t - t1) / (t2 - t1);
  return cfg.eta_f;
}

double iota(std::size_t labeled_in_batch, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("iota: empty batch");
  if (labeled_in_batch > batch_size) throw std::invalid_argument("iota: E exceeds B");
  return static_cast<double>(labeled_in_batch) / static_cast<double>(batch_size);
}

std::vector<PseudoLabel> pseudo_labels(const std::vector<DenseArray>& probs,
                                       ConfidenceEMA& ema, const WeightingConfig& cfg) {
  std::vector<PseudoLabel> out;
  out.reserve(probs.size());
  for (const auto& p : probs) {
    PseudoLabel pl;
    pl.label = argmax_lowest_tie(p);
    pl.max_prob = max_entry(p);
    pl.weight = sample_weight(p, ema, cfg);
    out.push_back(pl);
  }
  return out;
}

double quantity_oracle(const std::vector<DenseArray>& probs, ConfidenceEMA& ema,
                       const WeightingConfig& cfg) {
  if (probs.empty()) throw std::invalid_argument("quantity_oracle: empty pool");
  double total = 0.0;
  for (const auto& p : probs) total += sample_weight(p, ema, cfg);
  return total / static_cast<double>(probs.size());
}

double quality_oracle(const std::vector<DenseArray>& probs, const std::vector<int>& truth,
                      ConfidenceEMA& ema, const WeightingConfig& cfg) {
  if (probs.size() != truth.size())
    throw std::invalid_argument("quality_oracle: pool/label size mismatch");
  double weighted_correct = 0.0, weight_sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double w = sample_weight(probs[i], ema, cfg);
    weight_sum += w;
    if (argmax_lowest_tie(probs[i]) == truth[i]) weighted_correct += w;
  }
  if (weight_sum <= 0.0) throw std::domain_error("quality_oracle: all weights zero");
  return weighted_correct / weight_sum;
}

namespace {

// Probability vector with a prescribed strict max at argmax_class and the
// remaining mass spread uniformly.
DenseArray prob_vector(double max_prob, int classes, int argmax_class) {
  if (max_prob <= 1.0 / static_cast<double>(classes) || max_prob >= 1.0)
    throw std::invalid_argument("prob_vector: max must lie in (1/C, 1)");
  DenseArray p = DenseArray::full({static_cast<std::size_t>(classes)},
                                  (1.0 - max_prob) / static_cast<double>(classes - 1));
  p.data[static_cast<std::size_t>(argmax_class)] = max_prob;
  return p;
}

}  // namespace

PoolCheck check_pool_bounds(const std::vector<double>& max_probs,
                            const std::vector<int>& predicted,
                            const std::vector<int>& truth, double mean,
                            double variance, int classes, double lambda_max) {
  if (max_probs.empty()) throw std::invalid_argument("check_pool_bounds: empty pool");
  ConfidenceEMA ema(classes, 0.999);
  ema.mean = mean;
  ema.variance = variance;
  WeightingConfig cfg{lambda_max};
  double inv_c = 1.0 / static_cast<double>(classes);
  double b = ema.scale();

  std::vector<DenseArray> pool;
  pool.reserve(max_probs.size());
  for (std::size_t i = 0; i < max_probs.size(); ++i)
    pool.push_back(prob_vector(max_probs[i], classes, predicted[i]));

  PoolCheck check;
  check.f = quantity_oracle(pool, ema, cfg);
  check.lower_chain = 0.5 * lambda_max * (1.0 + std::exp(-std::fabs(inv_c - mean) / b));
  check.g = quality_oracle(pool, truth, ema, cfg);

  std::size_t above = 0, below = 0;
  double correct_above = 0.0;
  for (std::size_t i = 0; i < max_probs.size(); ++i) {
    if (max_probs[i] >= mean) {
      ++above;
      if (predicted[i] == truth[i]) correct_above += 1.0;
    } else {
      ++below;
    }
  }
  check.g_bound = above == 0 ? 0.0 : correct_above / (2.0 * static_cast<double>(above));

  if (below == 0) {
    // everything at full weight: f equals lambda_max exactly, the chain
    // degenerates, and only the quality bound remains meaningful
    if (check.f != lambda_max)
      check.violation = "degenerate pool but f != lambda_max";
    else if (!(check.g >= check.g_bound))
      check.violation = "g below quality bound";
    return check;
  }
  if (!(check.f > 0.5 * lambda_max))
    check.violation = "f <= lambda_max/2";
  else if (!(check.f < lambda_max))
    check.violation = "f >= lambda_max";
  else if (!(check.f >= check.lower_chain))
    check.violation = "f below chain lower bound";
  else if (!(check.g >= check.g_bound))
    check.violation = "g below quality bound";
  return check;
}

BoundReport verify_weighting_bounds(std::size_t trials, std::size_t pool_size,
                                    int classes, std::uint64_t seed,
                                    double lambda_max) {
  if (pool_size < 4 || pool_size % 2 != 0)
    throw std::invalid_argument("verify_weighting_bounds: pool size must be even and >= 4");
  BoundReport report;
  report.trials = trials;
  Rng rng(stream_seed(seed, 0, 0, "bounds"));
  double inv_c = 1.0 / static_cast<double>(classes);

  for (std::size_t trial = 0; trial < trials; ++trial) {
    // Every 8th trial pins the running mean to the pool mean by drawing
    // symmetric pairs around it; other trials draw the two halves freely.
    // Both constructions put exactly half the pool strictly below the mean,
    // the regime the bounds are stated for.
    bool symmetric = trial % 8 == 7;
    double mu = rng.uniform(inv_c + 0.05, 0.97);
    std::vector<double> maxes;
    maxes.reserve(pool_size);
    if (symmetric) {
      double span = 0.95 * std::min(mu - inv_c, 1.0 - mu);
      for (std::size_t i = 0; i < pool_size / 2; ++i) {
        double d = rng.uniform(1e-6, span);
        maxes.push_back(mu - d);
        maxes.push_back(mu + d);
      }
    } else {
      for (std::size_t i = 0; i < pool_size / 2; ++i)
        maxes.push_back(rng.uniform(inv_c + 1e-7, mu - 1e-9));
      for (std::size_t i = 0; i < pool_size / 2; ++i)
        maxes.push_back(rng.uniform(mu, 1.0 - 1e-9));
    }

    std::vector<int> truth, predicted;
    for (std::size_t i = 0; i < maxes.size(); ++i) {
      int arg = static_cast<int>(rng.uniform_int(0, classes - 1));
      predicted.push_back(arg);
      bool correct = rng.uniform() < 0.7;
      truth.push_back(correct ? arg : (arg + 1) % classes);
    }

    // scale derives from the pool's own spread, matching how b comes from
    // the tracked variance during training
    BatchStats pool_stats = batch_confidence_stats_from_conf(maxes);
    PoolCheck check = check_pool_bounds(maxes, predicted, truth, mu,
                                        std::max(pool_stats.variance, 1e-10),
                                        classes, lambda_max);
    if (!check.violation.empty()) {
      ++report.violations;
      if (report.failures.size() < 16)
        report.failures.push_back({trial, check.violation, check.f, check.lower_chain,
                                   check.g, check.g_bound});
    }
  }
  return report;
}

}  // namespace ssfl

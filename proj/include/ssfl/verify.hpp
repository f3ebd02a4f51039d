#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfl/weighting.hpp"

namespace ssfl {

struct CheckLine {
  std::string name;
  bool pass = false;
  std::string detail;
};

// Finite-difference checks of every loss head (supervised, weighted
// unsupervised, local contrastive with pair selection + dynamic temperature,
// prototype alignment, and the combined total) on a small random model.
CheckLine verify_loss_gradients(std::size_t seed_count, double step, double tolerance);

// aggregate_prototypes against a brute-force count-weighted mean on random
// small instances, plus the momentum identities at kappa 0 / 0.5 / 1.
CheckLine verify_aggregation_oracle(std::size_t instances, std::uint64_t seed);
CheckLine verify_momentum_identities(std::uint64_t seed);

// The tracked variance must apply the unbiased batch correction: the check
// recomputes the trace with directly computed sample variance and also
// confirms that a deliberately uncorrected trace diverges from it.
CheckLine verify_ema_correction(std::uint64_t seed);

// Wrapper around verify_weighting_bounds with a printable summary.
CheckLine verify_bounds_check(std::size_t trials, std::size_t pool, int classes,
                              std::uint64_t seed);

}  // namespace ssfl

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfl/config.hpp"
#include "ssfl/datagen.hpp"
#include "ssfl/federation.hpp"

namespace ssfl {

struct HarnessOptions {
  std::string config_path;  // empty -> defaults
  std::string out_dir;
  std::uint64_t seed_offset = 0;
  bool sequential = false;  // force single-threaded deterministic mode
};

// Dataset + per-client splits for one trial seed. Partitions are keyed by
// the seed only, so ablation variants sharing a seed see identical data.
struct PreparedTrial {
  std::vector<SignalSample> data;
  std::vector<ClientSplit> splits;
};
PreparedTrial prepare_trial(const RunConfig& cfg, std::uint64_t seed);

struct TrialSummary {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::vector<double> client_accuracy;
  std::uint64_t uplink_bytes_total = 0;
  std::uint64_t model_snapshot_bytes = 0;
  double wall_clock_s = 0.0;
};

struct MethodSummary {
  std::vector<TrialSummary> trials;
  double mean = 0.0;
  double stddev = 0.0;
  double median = 0.0;
};

// Runs the configured method over every trial seed; writes per-seed
// artifacts when out_dir is non-empty.
MethodSummary run_trials(const RunConfig& cfg, const HarnessOptions& opts,
                         const std::string& out_dir);

int cmd_train(const HarnessOptions& opts);
int cmd_ablate(const HarnessOptions& opts);
int cmd_verify(const HarnessOptions& opts);
int cmd_payload_report(const HarnessOptions& opts);
int cmd_gen_data(const HarnessOptions& opts);

int resolve_threads(bool sequential);  // SSFL_THREADS override

}  // namespace ssfl

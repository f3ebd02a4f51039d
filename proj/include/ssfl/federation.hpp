#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssfl/datagen.hpp"
#include "ssfl/losses.hpp"
#include "ssfl/metrics.hpp"
#include "ssfl/model.hpp"
#include "ssfl/optimizer.hpp"
#include "ssfl/prototypes.hpp"
#include "ssfl/weighting.hpp"

namespace ssfl {

enum class Method { kPrototypeSemi, kFedAvgSupervised, kFixmatchThreshold };

struct FederationConfig {
  ModelConfig model;
  ScheduleConfig schedule;
  WeightingConfig weighting;
  ContrastiveConfig contrastive;
  Method method = Method::kPrototypeSemi;

  double ema_momentum = 0.999;
  double kappa = 0.9;
  double threshold = 0.95;  // fixmatch confidence cut

  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int fine_tune_epochs = 5;

  int max_segments = 8;
  double jitter_std = 0.05;         // weak view
  double strong_jitter_std = 0.05;  // strong view
  double scale_lo = 0.9;
  double scale_hi = 1.1;

  bool use_laplace_weighting = true;   // off -> every pseudo label at lambda_max
  bool use_local_contrastive = true;
  bool use_global_contrastive = true;
  bool pair_by_pseudo_label = true;    // off -> own augmented view only
  bool dynamic_temperature = true;
  bool agg_contributor_mean = false;   // divide aggregated class by client count

  int stragglers = 0;
  int threads = 0;  // 0 -> one thread per client up to hardware size
};

struct ClientState {
  int id = 0;
  ModelParams params;
  ClientSplit split;
  ConfidenceEMA ema;
  AdamOptimizer opt;
  bool lcl_degenerate_logged = false;
};

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]
  std::size_t total = 0;
};

struct RoundClientResult {
  MetricsRecord metrics;
  PrototypeBank local_bank;
  double wall_ms = 0.0;
};

struct RunArtifact {
  std::vector<double> client_accuracy;
  std::vector<std::size_t> client_test_sizes;
  double accuracy = 0.0;  // sample-weighted over clients
  std::uint64_t uplink_bytes_total = 0;
  std::uint64_t model_snapshot_bytes = 0;
  std::vector<MetricsRecord> metrics;
  std::vector<std::pair<int, double>> timings;  // flattened (round, ms) per client order
  PrototypeBank global_bank;
  std::vector<PrototypeBank> client_banks;  // final round's local banks
  std::vector<ModelParams> final_params;
  double wall_clock_s = 0.0;
};

// Mean embedding per class over the client's current data: labeled samples
// (no augmentation) under their true class, unlabeled samples under the
// pseudo label of their weak view.
PrototypeBank compute_local_prototypes(const ClientState& client,
                                       const std::vector<SignalSample>& data,
                                       const FederationConfig& cfg,
                                       std::uint64_t run_seed, int round);

// One local epoch of mini-batch training against a snapshot of the global
// prototype bank. Returns metrics and the fresh uplink bank.
RoundClientResult local_train_round(ClientState& client,
                                    const std::vector<SignalSample>& data,
                                    const PrototypeBank& global_bank, int round,
                                    const FederationConfig& cfg, std::uint64_t run_seed);

// Supervised-only passes over the labeled split.
void fine_tune(ClientState& client, const std::vector<SignalSample>& data,
               const FederationConfig& cfg, std::uint64_t run_seed, int epochs);

EvalResult evaluate(const ClientState& client, const std::vector<SignalSample>& data,
                    const FederationConfig& cfg);

// Full training run for any method. Straggler clients still train and
// receive the downlink; only their uplink is dropped that round.
RunArtifact run_training(const std::vector<SignalSample>& data,
                         const std::vector<ClientSplit>& splits,
                         const FederationConfig& cfg, std::uint64_t run_seed);

// Sample-count-weighted mean of client parameters.
ModelParams average_params(const std::vector<ModelParams>& params,
                           const std::vector<std::size_t>& weights);

}  // namespace ssfl

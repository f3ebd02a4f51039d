#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ssfl/datagen.hpp"
#include "ssfl/federation.hpp"

namespace ssfl {

// Every knob of a run, parsed from a plain-text key=value file with optional
// [section] headers. Unknown keys are rejected; ranges are validated at load;
// the fully defaulted config is echoed next to the outputs.
struct RunConfig {
  // dataset
  int classes = 3;
  int samples_per_class = 300;
  std::size_t window_length = 256;
  std::size_t channels = 1;
  double noise_std = 2.0;

  // federation
  int clients = 5;
  double dirichlet_nu = 0.5;
  double label_rate = 0.10;
  int rounds = 60;
  int stragglers = 0;

  // weighting; the tracker momentum is sized for desk-scale batch counts
  // (a few hundred updates per run, not tens of thousands)
  double lambda_max = 1.0;
  double ema_momentum = 0.99;
  double threshold = 0.95;

  // schedules
  double eta_f = 3.0;
  double t1_frac = 0.3;
  double t2_frac = 0.7;
  double kappa = 0.7;

  // contrastive
  double tau = 0.2;
  double alpha = 1.0;

  // augment; weak jitter stays mild so pseudo labels come from a nearly
  // clean view, the strong view is the destructive one
  int max_segments = 8;
  double jitter_std = 0.05;
  double strong_jitter_std = 0.05;
  double scale_min = 0.9;
  double scale_max = 1.1;

  // model
  std::vector<std::size_t> conv_channels = {16, 32};
  int kernel = 8;
  int padding = 4;
  int pool = 2;
  std::size_t proj_hidden = 64;
  std::size_t embed_dim = 32;

  // optimizer
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int batch_size = 16;
  int fine_tune_epochs = 5;

  // run
  std::string method = "ssfl-dcsl";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

  // ablation toggles
  bool tlaw = true;
  bool lcl = true;
  bool gcl = true;
  bool spnp = true;
  bool dt = true;
  bool agg_contributor_mean = false;

  SyntheticSpec dataset_spec() const;
  FederationConfig federation_config(int threads) const;

  std::string to_text() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
void write_config(const RunConfig& cfg, const std::string& path);

}  // namespace ssfl

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssfl/dense_array.hpp"
#include "ssfl/rng.hpp"

namespace ssfl {

// One multichannel signal window, normalized amplitude. label is absent for
// augmented views (augmentation strips it).
struct SignalSample {
  DenseArray window;           // (channels, length)
  std::optional<int> label;
};

struct ClassRecipe {
  double base_freq = 8.0;      // cycles per window
  std::vector<double> harmonic_amps = {1.0};
  double am_depth = 0.0;       // amplitude-modulation depth on harmonics
  double am_freq = 3.0;        // modulation cycles per window
};

struct SyntheticSpec {
  int classes = 3;
  int samples_per_class = 300;
  std::size_t length = 256;
  std::size_t channels = 1;
  double noise_std = 0.5;
  std::vector<ClassRecipe> recipes;  // one per class; filled by defaults() if empty

  // Harmonic families: class 0 is a single tone, higher classes add
  // modulated harmonics. Base frequencies are distinct by construction.
  static SyntheticSpec defaults(int classes, int samples_per_class,
                                std::size_t length, std::size_t channels,
                                double noise_std);
};

std::vector<SignalSample> generate_dataset(const SyntheticSpec& spec, std::uint64_t seed);

// Per-client index lists: labeled train, unlabeled train, test.
struct ClientSplit {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<std::size_t> test;
  double label_rate = 0.0;
  double concentration = 0.0;
};

// Class-wise Dirichlet(concentration) assignment of samples to clients.
// Resamples the proportion vectors until every client holds at least
// min_client_samples samples.
std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<int>& labels, int clients, double concentration,
    std::uint64_t seed, std::size_t min_client_samples = 1);

// 4:1 train/test split then labeled/unlabeled split at label_rate, both
// stratified per class within the client.
ClientSplit label_split(const std::vector<std::size_t>& client_indices,
                        const std::vector<int>& labels, double label_rate,
                        std::uint64_t seed);

// jitter + scaling
SignalSample weak_augment(const SignalSample& s, double jitter_std,
                          double scale_lo, double scale_hi, Rng& rng);

// segment permutation (up to max_segments pieces) + jitter
SignalSample strong_augment(const SignalSample& s, int max_segments,
                            double jitter_std, Rng& rng);

// Dataset export/import: directory of binary window files plus a manifest
// line per sample: "<file> <client> <split> <label-or-?>".
struct ManifestRow {
  std::string file;
  int client;
  std::string split;  // labeled | unlabeled | test
  std::optional<int> label;
};

void export_dataset(const std::string& dir, const std::vector<SignalSample>& samples,
                    const std::vector<ClientSplit>& splits);
std::pair<std::vector<SignalSample>, std::vector<ManifestRow>> import_dataset(
    const std::string& dir);

}  // namespace ssfl

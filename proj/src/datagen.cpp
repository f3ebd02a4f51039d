#include "ssfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ssfl/serialize.hpp"

namespace ssfl {

namespace {
constexpr double kTwoPi = 6.283185307179586476925;
}

SyntheticSpec SyntheticSpec::defaults(int classes, int samples_per_class,
                                      std::size_t length, std::size_t channels,
                                      double noise_std) {
  SyntheticSpec spec;
  spec.classes = classes;
  spec.samples_per_class = samples_per_class;
  spec.length = length;
  spec.channels = channels;
  spec.noise_std = noise_std;
  for (int j = 0; j < classes; ++j) {
    ClassRecipe r;
    r.base_freq = 8.0 + 3.0 * j;
    if (j == 0) {
      r.harmonic_amps = {1.0};
      r.am_depth = 0.0;
    } else {
      r.harmonic_amps = {1.0, 0.30, 0.15};
      r.am_depth = 0.2;
      r.am_freq = 3.0;
    }
    spec.recipes.push_back(std::move(r));
  }
  return spec;
}

std::vector<SignalSample> generate_dataset(const SyntheticSpec& spec, std::uint64_t seed) {
  if (spec.classes < 2) throw std::invalid_argument("generate_dataset: needs >= 2 classes");
  if (spec.samples_per_class <= 0)
    throw std::invalid_argument("generate_dataset: samples_per_class must be positive");
  if (spec.noise_std < 0.0) throw std::invalid_argument("generate_dataset: negative noise std");
  SyntheticSpec sp = spec;
  if (sp.recipes.empty())
    sp = SyntheticSpec::defaults(spec.classes, spec.samples_per_class, spec.length,
                                 spec.channels, spec.noise_std);
  if (static_cast<int>(sp.recipes.size()) != sp.classes)
    throw std::invalid_argument("generate_dataset: recipe count != classes");
  for (int a = 0; a < sp.classes; ++a)
    for (int b = a + 1; b < sp.classes; ++b)
      if (sp.recipes[a].base_freq == sp.recipes[b].base_freq)
        throw std::invalid_argument("generate_dataset: classes share a base frequency");

  std::vector<SignalSample> out;
  out.reserve(static_cast<std::size_t>(sp.classes) * sp.samples_per_class);
  double inv_l = 1.0 / static_cast<double>(sp.length);
  for (int cls = 0; cls < sp.classes; ++cls) {
    const ClassRecipe& r = sp.recipes[cls];
    Rng rng(stream_seed(seed, static_cast<std::uint64_t>(cls), 0, "gen"));
    for (int s = 0; s < sp.samples_per_class; ++s) {
      DenseArray w = DenseArray::zeros({sp.channels, sp.length});
      for (std::size_t ch = 0; ch < sp.channels; ++ch) {
        double amp_scale = rng.uniform(0.8, 1.2);
        double phase = rng.uniform(0.0, kTwoPi);
        double am_phase = rng.uniform(0.0, kTwoPi);
        double* row = &w.data[ch * sp.length];
        for (std::size_t t = 0; t < sp.length; ++t) {
          double x = static_cast<double>(t) * inv_l;
          double v = 0.0;
          for (std::size_t h = 0; h < r.harmonic_amps.size(); ++h) {
            double f = r.base_freq * static_cast<double>(h + 1);
            double a = r.harmonic_amps[h];
            if (h > 0 && r.am_depth > 0.0)
              a *= 1.0 + r.am_depth * std::sin(kTwoPi * r.am_freq * x + am_phase);
            v += a * std::sin(kTwoPi * f * x + phase * (h + 1));
          }
          row[t] = amp_scale * v;
        }
        if (sp.noise_std > 0.0)
          for (std::size_t t = 0; t < sp.length; ++t)
            row[t] += rng.gaussian(0.0, sp.noise_std);
      }
      out.push_back({std::move(w), cls});
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(
    const std::vector<int>& labels, int clients, double concentration,
    std::uint64_t seed, std::size_t min_client_samples) {
  if (clients < 1) throw std::invalid_argument("dirichlet_partition: clients must be >= 1");
  if (concentration <= 0.0)
    throw std::invalid_argument("dirichlet_partition: concentration must be > 0");
  if (static_cast<std::size_t>(clients) > labels.size())
    throw std::invalid_argument("dirichlet_partition: more clients than samples");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  Rng rng(stream_seed(seed, 0, 0, "partition"));
  const int max_attempts = 1000;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    std::vector<std::vector<std::size_t>> assign(static_cast<std::size_t>(clients));
    for (auto& [cls, idx] : by_class) {
      std::vector<std::size_t> shuffled = idx;
      rng.shuffle(shuffled);
      std::vector<double> props =
          clients == 1 ? std::vector<double>{1.0}
                       : rng.dirichlet(concentration, static_cast<std::size_t>(clients));
      // cumulative cut points over the shuffled class list
      std::size_t n = shuffled.size();
      std::size_t taken = 0;
      double cum = 0.0;
      for (int k = 0; k < clients; ++k) {
        cum += props[static_cast<std::size_t>(k)];
        std::size_t upto = (k == clients - 1)
                               ? n
                               : static_cast<std::size_t>(std::llround(cum * static_cast<double>(n)));
        upto = std::min(upto, n);
        for (std::size_t i = taken; i < upto; ++i)
          assign[static_cast<std::size_t>(k)].push_back(shuffled[i]);
        taken = std::max(taken, upto);
      }
    }
    bool ok = true;
    for (const auto& a : assign)
      if (a.size() < min_client_samples) { ok = false; break; }
    if (ok) {
      for (auto& a : assign) std::sort(a.begin(), a.end());
      return assign;
    }
  }
  throw std::runtime_error(
      "dirichlet_partition: could not satisfy minimum client size after resampling");
}

namespace {

// Largest-remainder apportioning of `total` picks across per-class pools.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& pool_sizes,
                                   std::size_t total) {
  std::size_t n = 0;
  for (std::size_t s : pool_sizes) n += s;
  if (total > n) throw std::logic_error("apportion: total exceeds pool");
  std::vector<std::size_t> take(pool_sizes.size(), 0);
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < pool_sizes.size(); ++c) {
    double exact = n == 0 ? 0.0
                          : static_cast<double>(total) * static_cast<double>(pool_sizes[c]) /
                                static_cast<double>(n);
    take[c] = std::min(pool_sizes[c], static_cast<std::size_t>(exact));
    assigned += take[c];
    rema.push_back({exact - static_cast<double>(take[c]), c});
  }
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& [frac, c] : rema) {
    if (assigned >= total) break;
    if (take[c] < pool_sizes[c]) {
      ++take[c];
      ++assigned;
    }
  }
  // top up from any class with spare capacity if fractional ties left a gap
  for (std::size_t c = 0; c < take.size() && assigned < total; ++c) {
    while (take[c] < pool_sizes[c] && assigned < total) {
      ++take[c];
      ++assigned;
    }
  }
  return take;
}

}  // namespace

ClientSplit label_split(const std::vector<std::size_t>& client_indices,
                        const std::vector<int>& labels, double label_rate,
                        std::uint64_t seed) {
  if (label_rate <= 0.0 || label_rate > 1.0)
    throw std::invalid_argument("label_split: label rate must lie in (0, 1]");
  if (client_indices.size() < 5)
    throw std::invalid_argument("label_split: client has fewer than 5 samples, cannot honor 4:1");

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t idx : client_indices) by_class[labels[idx]].push_back(idx);

  Rng rng(stream_seed(seed, 0, 0, "split"));
  std::vector<std::vector<std::size_t>> pools;
  for (auto& [cls, idx] : by_class) {
    rng.shuffle(idx);
    pools.push_back(idx);
  }

  std::size_t n = client_indices.size();
  std::size_t test_total = static_cast<std::size_t>(std::llround(static_cast<double>(n) / 5.0));
  std::vector<std::size_t> pool_sizes;
  for (const auto& p : pools) pool_sizes.push_back(p.size());
  std::vector<std::size_t> test_take = apportion(pool_sizes, test_total);

  ClientSplit split;
  split.label_rate = label_rate;
  std::vector<std::vector<std::size_t>> train_pools;
  for (std::size_t c = 0; c < pools.size(); ++c) {
    for (std::size_t i = 0; i < test_take[c]; ++i) split.test.push_back(pools[c][i]);
    train_pools.push_back(
        std::vector<std::size_t>(pools[c].begin() + static_cast<long>(test_take[c]), pools[c].end()));
  }

  std::size_t train_total = n - split.test.size();
  std::size_t labeled_total =
      static_cast<std::size_t>(std::llround(label_rate * static_cast<double>(train_total)));
  if (label_rate >= 1.0) labeled_total = train_total;
  std::vector<std::size_t> train_sizes;
  for (const auto& p : train_pools) train_sizes.push_back(p.size());
  std::vector<std::size_t> lab_take = apportion(train_sizes, labeled_total);
  for (std::size_t c = 0; c < train_pools.size(); ++c) {
    for (std::size_t i = 0; i < train_pools[c].size(); ++i) {
      if (i < lab_take[c])
        split.labeled.push_back(train_pools[c][i]);
      else
        split.unlabeled.push_back(train_pools[c][i]);
    }
  }
  std::sort(split.labeled.begin(), split.labeled.end());
  std::sort(split.unlabeled.begin(), split.unlabeled.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SignalSample weak_augment(const SignalSample& s, double jitter_std,
                          double scale_lo, double scale_hi, Rng& rng) {
  if (scale_lo <= 0.0 || scale_hi < scale_lo)
    throw std::invalid_argument("weak_augment: bad scale range");
  SignalSample out;
  out.window = s.window;
  out.label = std::nullopt;
  double scale = rng.uniform(scale_lo, scale_hi);
  for (double& v : out.window.data) {
    double jit = jitter_std > 0.0 ? rng.gaussian(0.0, jitter_std) : 0.0;
    v = (v + jit) * scale;
  }
  return out;
}

SignalSample strong_augment(const SignalSample& s, int max_segments,
                            double jitter_std, Rng& rng) {
  std::size_t l = s.window.dim(1);
  if (max_segments < 1 || static_cast<std::size_t>(max_segments) > l)
    throw std::invalid_argument("strong_augment: max_segments out of range");
  SignalSample out;
  out.label = std::nullopt;

  int nseg = static_cast<int>(rng.uniform_int(1, max_segments));
  // nseg-1 distinct interior cut points
  std::vector<std::size_t> cuts;
  if (nseg > 1) {
    std::vector<std::size_t> interior(l - 1);
    for (std::size_t i = 0; i < l - 1; ++i) interior[i] = i + 1;
    rng.shuffle(interior);
    cuts.assign(interior.begin(), interior.begin() + (nseg - 1));
    std::sort(cuts.begin(), cuts.end());
  }
  std::vector<std::pair<std::size_t, std::size_t>> segments;
  std::size_t start = 0;
  for (std::size_t c : cuts) {
    segments.push_back({start, c});
    start = c;
  }
  segments.push_back({start, l});
  rng.shuffle(segments);

  std::size_t channels = s.window.dim(0);
  out.window = DenseArray::zeros({channels, l});
  std::size_t pos = 0;
  for (const auto& [b, e] : segments) {
    for (std::size_t ch = 0; ch < channels; ++ch)
      std::copy(s.window.data.begin() + static_cast<long>(ch * l + b),
                s.window.data.begin() + static_cast<long>(ch * l + e),
                out.window.data.begin() + static_cast<long>(ch * l + pos));
    pos += e - b;
  }
  if (jitter_std > 0.0)
    for (double& v : out.window.data) v += rng.gaussian(0.0, jitter_std);
  return out;
}

void export_dataset(const std::string& dir, const std::vector<SignalSample>& samples,
                    const std::vector<ClientSplit>& splits) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<int> client_of(samples.size(), -1);
  std::vector<std::string> split_of(samples.size(), "none");
  for (std::size_t k = 0; k < splits.size(); ++k) {
    for (std::size_t i : splits[k].labeled) { client_of[i] = static_cast<int>(k); split_of[i] = "labeled"; }
    for (std::size_t i : splits[k].unlabeled) { client_of[i] = static_cast<int>(k); split_of[i] = "unlabeled"; }
    for (std::size_t i : splits[k].test) { client_of[i] = static_cast<int>(k); split_of[i] = "test"; }
  }
  std::ofstream manifest(fs::path(dir) / "manifest.txt", std::ios::trunc);
  if (!manifest) throw std::runtime_error("export_dataset: cannot write manifest");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::ostringstream name;
    name << "window_" << i << ".bin";
    write_snapshot_file((fs::path(dir) / name.str()).string(),
                        {{"window", samples[i].window}});
    // unlabeled windows keep their label out of the manifest
    std::string lab = "?";
    if (split_of[i] != "unlabeled" && samples[i].label) lab = std::to_string(*samples[i].label);
    manifest << name.str() << " " << client_of[i] << " " << split_of[i] << " " << lab << "\n";
  }
}

std::pair<std::vector<SignalSample>, std::vector<ManifestRow>> import_dataset(
    const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("import_dataset: missing manifest");
  std::vector<SignalSample> samples;
  std::vector<ManifestRow> rows;
  std::string file, split, lab;
  int client;
  while (manifest >> file >> client >> split >> lab) {
    auto entries = read_snapshot_file((fs::path(dir) / file).string());
    if (entries.size() != 1) throw std::runtime_error("import_dataset: bad window file " + file);
    SignalSample s;
    s.window = std::move(entries[0].array);
    ManifestRow row{file, client, split, std::nullopt};
    if (lab != "?") {
      row.label = std::stoi(lab);
      s.label = row.label;
    }
    samples.push_back(std::move(s));
    rows.push_back(std::move(row));
  }
  return {std::move(samples), std::move(rows)};
}

}  // namespace ssfl

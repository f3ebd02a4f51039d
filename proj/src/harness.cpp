#include "ssfl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "ssfl/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ssfl {

int resolve_threads(bool sequential) {
  if (sequential) return 1;
  if (const char* env = std::getenv("SSFL_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;  // federation picks one thread per client up to hardware size
}

PreparedTrial prepare_trial(const RunConfig& cfg, std::uint64_t seed) {
  PreparedTrial trial;
  trial.data = generate_dataset(cfg.dataset_spec(), seed);
  std::vector<int> labels;
  labels.reserve(trial.data.size());
  for (const auto& s : trial.data) labels.push_back(*s.label);
  // clients need 5+ samples to honor the 4:1 split
  auto assign = dirichlet_partition(labels, cfg.clients, cfg.dirichlet_nu, seed, 5);
  for (std::size_t k = 0; k < assign.size(); ++k) {
    ClientSplit split = label_split(assign[k], labels, cfg.label_rate,
                                    stream_seed(seed, k, 0, "label-split"));
    split.concentration = cfg.dirichlet_nu;
    trial.splits.push_back(std::move(split));
  }
  return trial;
}

namespace {

void write_trial_artifacts(const std::string& dir, const RunConfig& cfg,
                           const RunArtifact& art, std::uint64_t seed) {
  fs::create_directories(dir);
  write_config(cfg, (fs::path(dir) / "config.txt").string());

  MetricsWriter metrics((fs::path(dir) / "metrics.csv").string());
  for (const auto& r : art.metrics) metrics.append(r);
  metrics.flush();

  TimingsWriter timings((fs::path(dir) / "timings.csv").string());
  for (std::size_t i = 0; i < art.timings.size(); ++i) {
    int client = static_cast<int>(i % art.client_accuracy.size());
    timings.append(art.timings[i].first, client, art.timings[i].second);
  }

  for (std::size_t k = 0; k < art.final_params.size(); ++k)
    write_snapshot_file((fs::path(dir) / ("params_client_" + std::to_string(k) + ".bin")).string(),
                        art.final_params[k].entries);
  if (!art.global_bank.empty())
    write_snapshot_file((fs::path(dir) / "prototypes_global.bin").string(),
                        art.global_bank.to_entries());
  for (std::size_t k = 0; k < art.client_banks.size(); ++k)
    if (!art.client_banks[k].empty())
      write_snapshot_file(
          (fs::path(dir) / ("prototypes_client_" + std::to_string(k) + ".bin")).string(),
          art.client_banks[k].to_entries());

  json summary;
  summary["seed"] = seed;
  summary["accuracy"] = art.accuracy;
  summary["client_accuracy"] = art.client_accuracy;
  summary["uplink_bytes_total"] = art.uplink_bytes_total;
  summary["model_snapshot_bytes"] = art.model_snapshot_bytes;
  summary["wall_clock_s"] = art.wall_clock_s;
  std::ofstream f(fs::path(dir) / "summary.json");
  f << summary.dump(2) << "\n";
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

MethodSummary run_trials(const RunConfig& cfg, const HarnessOptions& opts,
                         const std::string& out_dir) {
  MethodSummary summary;
  FederationConfig fed = cfg.federation_config(resolve_threads(opts.sequential));
  std::vector<double> accs;
  for (std::uint64_t base_seed : cfg.seeds) {
    std::uint64_t seed = base_seed + opts.seed_offset;
    PreparedTrial trial = prepare_trial(cfg, seed);
    RunArtifact art = run_training(trial.data, trial.splits, fed, seed);
    TrialSummary ts;
    ts.seed = seed;
    ts.accuracy = art.accuracy;
    ts.client_accuracy = art.client_accuracy;
    ts.uplink_bytes_total = art.uplink_bytes_total;
    ts.model_snapshot_bytes = art.model_snapshot_bytes;
    ts.wall_clock_s = art.wall_clock_s;
    summary.trials.push_back(ts);
    accs.push_back(art.accuracy);
    if (!out_dir.empty())
      write_trial_artifacts((fs::path(out_dir) / ("seed_" + std::to_string(seed))).string(),
                            cfg, art, seed);
  }
  summary.mean = mean_of(accs);
  summary.stddev = stddev_of(accs);
  summary.median = median_of(accs);
  return summary;
}

int cmd_train(const HarnessOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.out_dir.empty()) {
    std::cerr << "train: --out is required\n";
    return 2;
  }
  fs::create_directories(opts.out_dir);
  write_config(cfg, (fs::path(opts.out_dir) / "config.txt").string());

  auto started = std::chrono::steady_clock::now();
  MethodSummary summary = run_trials(cfg, opts, opts.out_dir);
  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  json out;
  out["method"] = cfg.method;
  out["accuracy_mean"] = summary.mean;
  out["accuracy_std"] = summary.stddev;
  out["accuracy_median"] = summary.median;
  out["wall_clock_s"] = wall;
  json trials = json::array();
  for (const auto& t : summary.trials) {
    trials.push_back({{"seed", t.seed},
                      {"accuracy", t.accuracy},
                      {"client_accuracy", t.client_accuracy},
                      {"uplink_bytes_total", t.uplink_bytes_total},
                      {"model_snapshot_bytes", t.model_snapshot_bytes},
                      {"wall_clock_s", t.wall_clock_s}});
  }
  out["trials"] = trials;
  std::ofstream f(fs::path(opts.out_dir) / "summary.json");
  f << out.dump(2) << "\n";

  std::printf("%s: accuracy %.2f%% +/- %.2f%% over %zu trial(s)\n", cfg.method.c_str(),
              100.0 * summary.mean, 100.0 * summary.stddev, summary.trials.size());
  return 0;
}

int cmd_ablate(const HarnessOptions& opts) {
  RunConfig base = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.out_dir.empty()) {
    std::cerr << "ablate: --out is required\n";
    return 2;
  }
  base.method = "ssfl-dcsl";
  fs::create_directories(opts.out_dir);

  struct Variant {
    const char* name;
    bool tlaw, lcl, gcl, spnp, dt;
  };
  const std::vector<Variant> ladder = {
      {"pta", false, false, false, false, false},
      {"pta+lcl", false, true, false, false, false},
      {"pta+lcl+gcl", false, true, true, false, false},
      {"pta+lcl+gcl+tlaw", true, true, true, false, false},
      {"pta+lcl+gcl+tlaw+spnp", true, true, true, true, false},
      {"full", true, true, true, true, true},
  };

  std::ofstream csv(fs::path(opts.out_dir) / "ablation.csv", std::ios::trunc);
  csv << "variant,accuracy_mean,accuracy_std,accuracy_median";
  for (std::uint64_t s : base.seeds) csv << ",seed_" << s + opts.seed_offset;
  csv << "\n";

  int rc = 0;
  for (const auto& v : ladder) {
    RunConfig cfg = base;
    cfg.tlaw = v.tlaw;
    cfg.lcl = v.lcl;
    cfg.gcl = v.gcl;
    cfg.spnp = v.spnp;
    cfg.dt = v.dt;
    std::string vdir = (fs::path(opts.out_dir) / v.name).string();
    MethodSummary summary = run_trials(cfg, opts, vdir);
    csv << v.name << ',' << format_double(summary.mean) << ','
        << format_double(summary.stddev) << ',' << format_double(summary.median);
    for (const auto& t : summary.trials) csv << ',' << format_double(t.accuracy);
    csv << "\n";
    csv.flush();
    std::printf("%-24s accuracy %.2f%% +/- %.2f%% (median %.2f%%)\n", v.name,
                100.0 * summary.mean, 100.0 * summary.stddev, 100.0 * summary.median);
  }
  return rc;
}

int cmd_verify(const HarnessOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  (void)cfg;
  std::vector<CheckLine> lines;
  lines.push_back(verify_bounds_check(1000, 256, 3, 20240501));
  lines.push_back(verify_loss_gradients(20, 1e-5, 1e-4));
  lines.push_back(verify_aggregation_oracle(100, 7));
  lines.push_back(verify_momentum_identities(11));
  lines.push_back(verify_ema_correction(13));

  bool all = true;
  for (const auto& l : lines) {
    std::printf("[%s] %s — %s\n", l.pass ? "PASS" : "FAIL", l.name.c_str(),
                l.detail.c_str());
    all = all && l.pass;
  }
  return all ? 0 : 1;
}

int cmd_payload_report(const HarnessOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  FederationConfig fed = cfg.federation_config(1);
  ModelParams params = ModelParams::init(fed.model, 1);
  std::size_t model_bytes = encode_snapshot(params.entries).size();

  PrototypeBank bank;
  Rng rng(1);
  for (int cls = 0; cls < cfg.classes; ++cls) {
    PrototypeBank::Entry e;
    e.count = 10;
    e.vec.resize(cfg.embed_dim);
    for (double& v : e.vec) v = rng.gaussian(0.0, 1.0);
    bank.classes[cls] = std::move(e);
  }
  std::size_t proto_bytes = encode_uplink(bank).size();
  double ratio = static_cast<double>(proto_bytes) / static_cast<double>(model_bytes);

  std::printf("model parameters:   %zu scalars, %zu bytes per snapshot\n",
              params.scalar_count(), model_bytes);
  std::printf("prototype uplink:   %d classes x %zu dims, %zu bytes per round\n",
              cfg.classes, cfg.embed_dim, proto_bytes);
  std::printf("uplink/model ratio: %.6f (%.4f%%)\n", ratio, 100.0 * ratio);

  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir);
    json out;
    out["model_snapshot_bytes"] = model_bytes;
    out["prototype_uplink_bytes"] = proto_bytes;
    out["ratio"] = ratio;
    out["model_scalars"] = params.scalar_count();
    std::ofstream f(fs::path(opts.out_dir) / "payload.json");
    f << out.dump(2) << "\n";
  }
  return 0;
}

int cmd_gen_data(const HarnessOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? RunConfig{} : load_config(opts.config_path);
  if (opts.out_dir.empty()) {
    std::cerr << "gen-data: --out is required\n";
    return 2;
  }
  std::uint64_t seed = cfg.seeds.front() + opts.seed_offset;
  PreparedTrial trial = prepare_trial(cfg, seed);
  export_dataset(opts.out_dir, trial.data, trial.splits);
  std::printf("exported %zu windows for %zu clients to %s\n", trial.data.size(),
              trial.splits.size(), opts.out_dir.c_str());
  return 0;
}

}  // namespace ssfl

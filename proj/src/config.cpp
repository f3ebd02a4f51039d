#include "ssfl/config.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace ssfl {

namespace {

const std::vector<std::string> kSections = {
    "dataset", "federation", "weighting", "schedules", "contrastive",
    "augment",  "model",      "optimizer", "run",       "ablation"};

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  std::size_t e = s.find_last_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad(const std::string& msg) {
  throw std::invalid_argument("config: " + msg);
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    bad(key + ": not a number: '" + v + "'");
  }
}

long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    long n = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument("");
    return n;
  } catch (...) {
    bad(key + ": not an integer: '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  bad(key + ": expected on/off, got '" + v + "'");
}

template <typename T>
std::vector<T> to_list(const std::string& key, const std::string& v,
                       T (*conv)(const std::string&, const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad(key + ": empty list element");
    out.push_back(conv(key, item));
  }
  if (out.empty()) bad(key + ": empty list");
  return out;
}

long to_long_wrap(const std::string& k, const std::string& v) { return to_long(k, v); }

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad("line " + std::to_string(lineno) + ": unterminated section");
      std::string section = trim(line.substr(1, line.size() - 2));
      if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
        bad("unknown section [" + section + "]");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      bad("line " + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      bad("line " + std::to_string(lineno) + ": empty key or value");
    if (kv.count(key)) bad("duplicate key '" + key + "'");
    kv[key] = value;
  }

  auto take = [&kv](const std::string& key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) return "";
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("classes"); !v.empty()) cfg.classes = static_cast<int>(to_long("classes", v));
  if (auto v = take("samples_per_class"); !v.empty())
    cfg.samples_per_class = static_cast<int>(to_long("samples_per_class", v));
  if (auto v = take("window_length"); !v.empty())
    cfg.window_length = static_cast<std::size_t>(to_long("window_length", v));
  if (auto v = take("channels"); !v.empty())
    cfg.channels = static_cast<std::size_t>(to_long("channels", v));
  if (auto v = take("noise_std"); !v.empty()) cfg.noise_std = to_double("noise_std", v);

  if (auto v = take("clients"); !v.empty()) cfg.clients = static_cast<int>(to_long("clients", v));
  if (auto v = take("dirichlet_nu"); !v.empty()) cfg.dirichlet_nu = to_double("dirichlet_nu", v);
  if (auto v = take("chi"); !v.empty()) cfg.label_rate = to_double("chi", v);
  if (auto v = take("label_rate"); !v.empty()) cfg.label_rate = to_double("label_rate", v);
  if (auto v = take("rounds"); !v.empty()) cfg.rounds = static_cast<int>(to_long("rounds", v));
  if (auto v = take("stragglers"); !v.empty())
    cfg.stragglers = static_cast<int>(to_long("stragglers", v));

  if (auto v = take("lambda_max"); !v.empty()) cfg.lambda_max = to_double("lambda_max", v);
  if (auto v = take("ema_momentum"); !v.empty()) cfg.ema_momentum = to_double("ema_momentum", v);
  if (auto v = take("threshold"); !v.empty()) cfg.threshold = to_double("threshold", v);

  if (auto v = take("eta_f"); !v.empty()) cfg.eta_f = to_double("eta_f", v);
  if (auto v = take("t1_frac"); !v.empty()) cfg.t1_frac = to_double("t1_frac", v);
  if (auto v = take("t2_frac"); !v.empty()) cfg.t2_frac = to_double("t2_frac", v);
  if (auto v = take("kappa"); !v.empty()) cfg.kappa = to_double("kappa", v);

  if (auto v = take("tau"); !v.empty()) cfg.tau = to_double("tau", v);
  if (auto v = take("alpha"); !v.empty()) cfg.alpha = to_double("alpha", v);

  if (auto v = take("max_segments"); !v.empty())
    cfg.max_segments = static_cast<int>(to_long("max_segments", v));
  if (auto v = take("jitter_std"); !v.empty()) cfg.jitter_std = to_double("jitter_std", v);
  if (auto v = take("strong_jitter_std"); !v.empty())
    cfg.strong_jitter_std = to_double("strong_jitter_std", v);
  if (auto v = take("scale_min"); !v.empty()) cfg.scale_min = to_double("scale_min", v);
  if (auto v = take("scale_max"); !v.empty()) cfg.scale_max = to_double("scale_max", v);

  if (auto v = take("conv_channels"); !v.empty()) {
    cfg.conv_channels.clear();
    for (long n : to_list<long>("conv_channels", v, to_long_wrap))
      cfg.conv_channels.push_back(static_cast<std::size_t>(n));
  }
  if (auto v = take("kernel"); !v.empty()) cfg.kernel = static_cast<int>(to_long("kernel", v));
  if (auto v = take("padding"); !v.empty()) cfg.padding = static_cast<int>(to_long("padding", v));
  if (auto v = take("pool"); !v.empty()) cfg.pool = static_cast<int>(to_long("pool", v));
  if (auto v = take("proj_hidden"); !v.empty())
    cfg.proj_hidden = static_cast<std::size_t>(to_long("proj_hidden", v));
  if (auto v = take("embed_dim"); !v.empty())
    cfg.embed_dim = static_cast<std::size_t>(to_long("embed_dim", v));

  if (auto v = take("learning_rate"); !v.empty()) cfg.learning_rate = to_double("learning_rate", v);
  if (auto v = take("beta1"); !v.empty()) cfg.beta1 = to_double("beta1", v);
  if (auto v = take("beta2"); !v.empty()) cfg.beta2 = to_double("beta2", v);
  if (auto v = take("batch_size"); !v.empty())
    cfg.batch_size = static_cast<int>(to_long("batch_size", v));
  if (auto v = take("fine_tune_epochs"); !v.empty())
    cfg.fine_tune_epochs = static_cast<int>(to_long("fine_tune_epochs", v));

  if (auto v = take("method"); !v.empty()) cfg.method = v;
  if (auto v = take("seeds"); !v.empty()) {
    cfg.seeds.clear();
    for (long n : to_list<long>("seeds", v, to_long_wrap)) {
      if (n < 0) bad("seeds: negative seed");
      cfg.seeds.push_back(static_cast<std::uint64_t>(n));
    }
  }

  if (auto v = take("tlaw"); !v.empty()) cfg.tlaw = to_bool("tlaw", v);
  if (auto v = take("lcl"); !v.empty()) cfg.lcl = to_bool("lcl", v);
  if (auto v = take("gcl"); !v.empty()) cfg.gcl = to_bool("gcl", v);
  if (auto v = take("spnp"); !v.empty()) cfg.spnp = to_bool("spnp", v);
  if (auto v = take("dt"); !v.empty()) cfg.dt = to_bool("dt", v);
  if (auto v = take("agg_contributor_mean"); !v.empty())
    cfg.agg_contributor_mean = to_bool("agg_contributor_mean", v);

  if (!kv.empty()) bad("unknown key '" + kv.begin()->first + "'");

  // range validation
  if (cfg.classes < 2) bad("classes: must be >= 2");
  if (cfg.samples_per_class < 1) bad("samples_per_class: must be >= 1");
  if (cfg.window_length < 8) bad("window_length: must be >= 8");
  if (cfg.channels < 1) bad("channels: must be >= 1");
  if (cfg.noise_std < 0.0) bad("noise_std: must be >= 0");
  if (cfg.clients < 1) bad("clients: must be >= 1");
  if (cfg.dirichlet_nu <= 0.0) bad("dirichlet_nu: must be > 0");
  if (cfg.label_rate <= 0.0 || cfg.label_rate > 1.0) bad("label_rate: must lie in (0, 1]");
  if (cfg.rounds < 1) bad("rounds: must be >= 1");
  if (cfg.stragglers < 0 || cfg.stragglers >= cfg.clients)
    bad("stragglers: must lie in [0, clients)");
  if (cfg.lambda_max <= 0.0) bad("lambda_max: must be > 0");
  if (cfg.ema_momentum < 0.0 || cfg.ema_momentum >= 1.0)
    bad("ema_momentum: must lie in [0, 1)");
  if (cfg.threshold < 0.0) bad("threshold: must be >= 0");
  if (cfg.eta_f < 0.0) bad("eta_f: must be >= 0");
  if (cfg.t1_frac < 0.0 || cfg.t2_frac > 1.0 || cfg.t1_frac >= cfg.t2_frac)
    bad("t1_frac/t2_frac: need 0 <= t1 < t2 <= 1");
  if (cfg.kappa < 0.0 || cfg.kappa > 1.0) bad("kappa: must lie in [0, 1]");
  if (cfg.tau <= 0.0) bad("tau: must be > 0");
  if (cfg.alpha < 0.0) bad("alpha: must be >= 0");
  if (cfg.max_segments < 1 || static_cast<std::size_t>(cfg.max_segments) > cfg.window_length)
    bad("max_segments: must lie in [1, window_length]");
  if (cfg.jitter_std < 0.0) bad("jitter_std: must be >= 0");
  if (cfg.strong_jitter_std < 0.0) bad("strong_jitter_std: must be >= 0");
  if (cfg.scale_min <= 0.0 || cfg.scale_max < cfg.scale_min)
    bad("scale_min/scale_max: need 0 < min <= max");
  if (cfg.conv_channels.empty()) bad("conv_channels: need at least one layer");
  for (std::size_t c : cfg.conv_channels)
    if (c < 1) bad("conv_channels: channel counts must be >= 1");
  if (cfg.kernel < 1) bad("kernel: must be >= 1");
  if (cfg.padding < 0) bad("padding: must be >= 0");
  if (cfg.pool < 1) bad("pool: must be >= 1");
  if (cfg.proj_hidden < 1) bad("proj_hidden: must be >= 1");
  if (cfg.embed_dim < 1) bad("embed_dim: must be >= 1");
  if (cfg.learning_rate <= 0.0) bad("learning_rate: must be > 0");
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0) bad("beta1: must lie in [0, 1)");
  if (cfg.beta2 < 0.0 || cfg.beta2 >= 1.0) bad("beta2: must lie in [0, 1)");
  if (cfg.batch_size < 1) bad("batch_size: must be >= 1");
  if (cfg.fine_tune_epochs < 0) bad("fine_tune_epochs: must be >= 0");
  if (cfg.method != "ssfl-dcsl" && cfg.method != "fedavg-supervised" &&
      cfg.method != "fixmatch-threshold")
    bad("method: expected ssfl-dcsl | fedavg-supervised | fixmatch-threshold");
  if (cfg.seeds.empty()) bad("seeds: need at least one");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) bad("missing file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  auto d = [](double v) { return format_double(v); };
  out << "[dataset]\n";
  out << "classes = " << classes << "\n";
  out << "samples_per_class = " << samples_per_class << "\n";
  out << "window_length = " << window_length << "\n";
  out << "channels = " << channels << "\n";
  out << "noise_std = " << d(noise_std) << "\n\n";
  out << "[federation]\n";
  out << "clients = " << clients << "\n";
  out << "dirichlet_nu = " << d(dirichlet_nu) << "\n";
  out << "label_rate = " << d(label_rate) << "\n";
  out << "rounds = " << rounds << "\n";
  out << "stragglers = " << stragglers << "\n\n";
  out << "[weighting]\n";
  out << "lambda_max = " << d(lambda_max) << "\n";
  out << "ema_momentum = " << d(ema_momentum) << "\n";
  out << "threshold = " << d(threshold) << "\n\n";
  out << "[schedules]\n";
  out << "eta_f = " << d(eta_f) << "\n";
  out << "t1_frac = " << d(t1_frac) << "\n";
  out << "t2_frac = " << d(t2_frac) << "\n";
  out << "kappa = " << d(kappa) << "\n\n";
  out << "[contrastive]\n";
  out << "tau = " << d(tau) << "\n";
  out << "alpha = " << d(alpha) << "\n\n";
  out << "[augment]\n";
  out << "max_segments = " << max_segments << "\n";
  out << "jitter_std = " << d(jitter_std) << "\n";
  out << "strong_jitter_std = " << d(strong_jitter_std) << "\n";
  out << "scale_min = " << d(scale_min) << "\n";
  out << "scale_max = " << d(scale_max) << "\n\n";
  out << "[model]\n";
  out << "conv_channels = ";
  for (std::size_t i = 0; i < conv_channels.size(); ++i)
    out << (i ? "," : "") << conv_channels[i];
  out << "\n";
  out << "kernel = " << kernel << "\n";
  out << "padding = " << padding << "\n";
  out << "pool = " << pool << "\n";
  out << "proj_hidden = " << proj_hidden << "\n";
  out << "embed_dim = " << embed_dim << "\n\n";
  out << "[optimizer]\n";
  out << "learning_rate = " << d(learning_rate) << "\n";
  out << "beta1 = " << d(beta1) << "\n";
  out << "beta2 = " << d(beta2) << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "fine_tune_epochs = " << fine_tune_epochs << "\n\n";
  out << "[run]\n";
  out << "method = " << method << "\n";
  out << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) out << (i ? "," : "") << seeds[i];
  out << "\n\n";
  out << "[ablation]\n";
  out << "tlaw = " << (tlaw ? "on" : "off") << "\n";
  out << "lcl = " << (lcl ? "on" : "off") << "\n";
  out << "gcl = " << (gcl ? "on" : "off") << "\n";
  out << "spnp = " << (spnp ? "on" : "off") << "\n";
  out << "dt = " << (dt ? "on" : "off") << "\n";
  out << "agg_contributor_mean = " << (agg_contributor_mean ? "on" : "off") << "\n";
  return out.str();
}

void write_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) bad("cannot write config copy: " + path);
  f << cfg.to_text();
}

SyntheticSpec RunConfig::dataset_spec() const {
  return SyntheticSpec::defaults(classes, samples_per_class, window_length, channels,
                                 noise_std);
}

FederationConfig RunConfig::federation_config(int threads) const {
  FederationConfig f;
  f.model.in_channels = channels;
  f.model.window_length = window_length;
  f.model.conv_channels = conv_channels;
  f.model.kernel = kernel;
  f.model.padding = padding;
  f.model.pool = pool;
  f.model.proj_hidden = proj_hidden;
  f.model.embed_dim = embed_dim;
  f.model.classes = classes;

  f.schedule.total_rounds = static_cast<double>(rounds);
  f.schedule.eta_f = eta_f;
  f.schedule.t1_frac = t1_frac;
  f.schedule.t2_frac = t2_frac;

  f.weighting.lambda_max = lambda_max;
  f.contrastive.tau = tau;
  f.contrastive.alpha = alpha;

  if (method == "ssfl-dcsl")
    f.method = Method::kPrototypeSemi;
  else if (method == "fedavg-supervised")
    f.method = Method::kFedAvgSupervised;
  else
    f.method = Method::kFixmatchThreshold;

  f.ema_momentum = ema_momentum;
  f.kappa = kappa;
  f.threshold = threshold;
  f.batch_size = static_cast<std::size_t>(batch_size);
  f.learning_rate = learning_rate;
  f.beta1 = beta1;
  f.beta2 = beta2;
  f.fine_tune_epochs = fine_tune_epochs;
  f.max_segments = max_segments;
  f.jitter_std = jitter_std;
  f.strong_jitter_std = strong_jitter_std;
  f.scale_lo = scale_min;
  f.scale_hi = scale_max;
  f.use_laplace_weighting = tlaw;
  f.use_local_contrastive = lcl;
  f.use_global_contrastive = gcl;
  f.pair_by_pseudo_label = spnp;
  f.dynamic_temperature = dt;
  f.agg_contributor_mean = agg_contributor_mean;
  f.stragglers = stragglers;
  f.threads = threads;
  return f;
}

}  // namespace ssfl

#include "ssfl/verify.hpp"

#include <cmath>
#include <sstream>

#include "ssfl/losses.hpp"
#include "ssfl/model.hpp"
#include "ssfl/prototypes.hpp"
#include "ssfl/rng.hpp"
#include "ssfl/tape.hpp"

namespace ssfl {

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.in_channels = 1;
  cfg.window_length = 32;
  cfg.conv_channels = {4, 6};
  cfg.kernel = 4;
  cfg.padding = 2;
  cfg.pool = 2;
  cfg.proj_hidden = 8;
  cfg.embed_dim = 6;
  cfg.classes = 3;
  return cfg;
}

DenseArray random_batch(std::size_t n, const ModelConfig& cfg, Rng& rng) {
  DenseArray b = DenseArray::zeros({n, cfg.in_channels, cfg.window_length});
  for (double& v : b.data) v = rng.gaussian(0.0, 1.0);
  return b;
}

struct HeadCheck {
  std::string head;
  double max_rel = 0.0;
  bool pass = true;
};

std::vector<HeadCheck> check_heads_once(std::uint64_t seed, double step, double tol) {
  ModelConfig mc = tiny_model();
  ModelParams params = ModelParams::init(mc, seed);
  Rng rng(stream_seed(seed, 1, 1, "gradcheck"));
  std::size_t e = 3, bu = 5;
  ContrastiveConfig ccfg{0.5, 1.0};
  double sigma_t = 0.4;

  DenseArray lab_batch = random_batch(e, mc, rng);
  DenseArray weak_batch = random_batch(bu, mc, rng);
  DenseArray strong_batch = random_batch(bu, mc, rng);
  std::vector<int> labels;
  for (std::size_t i = 0; i < e; ++i)
    labels.push_back(static_cast<int>(rng.uniform_int(0, mc.classes - 1)));

  // pseudo labels/weights from an off-tape weak pass; constants thereafter
  EvalOut weak_eval = eval_forward(mc, params, weak_batch);
  DenseArray probs = softmax_rows(weak_eval.logits);
  ConfidenceEMA ema(mc.classes, 0.999);
  ema.mean = 0.6;
  ema.variance = 0.2;
  WeightingConfig wcfg{1.0};
  std::vector<DenseArray> rows;
  for (std::size_t i = 0; i < bu; ++i) {
    DenseArray row = DenseArray::zeros({probs.dim(1)});
    for (std::size_t j = 0; j < probs.dim(1); ++j) row.data[j] = probs.at2(i, j);
    rows.push_back(std::move(row));
  }
  std::vector<PseudoLabel> pls = pseudo_labels(rows, ema, wcfg);
  std::vector<int> pseudo_ids;
  for (const auto& pl : pls) pseudo_ids.push_back(pl.label);

  DenseArray global_protos = DenseArray::zeros({2, mc.embed_dim});
  for (double& v : global_protos.data) v = rng.gaussian(0.0, 1.0);

  auto build_gcl = [&](Tape& tape, const std::map<std::string, NodeId>& ids,
                       NodeId weak_emb) -> NodeId {
    // two pseudo classes forced by construction: rows split in half
    std::size_t half = bu / 2;
    DenseArray selector = DenseArray::zeros({2, bu});
    for (std::size_t r = 0; r < bu; ++r)
      selector.at2(r < half ? 0 : 1, r) = r < half ? 1.0 / static_cast<double>(half)
                                                   : 1.0 / static_cast<double>(bu - half);
    NodeId protos = tape.affine(tape.constant(selector), weak_emb,
                                tape.constant(DenseArray::zeros({mc.embed_dim})));
    (void)ids;
    return global_contrastive_loss(tape, protos, global_protos, ccfg, sigma_t, true);
  };

  std::vector<HeadCheck> checks;
  for (int head = 0; head < 5; ++head) {
    Tape tape;
    auto ids = add_parameters(tape, params, true);
    NodeId terminal = -1;
    std::string name;
    switch (head) {
      case 0: {
        name = "supervised";
        ModelGraph g = build_forward_view(tape, mc, ids, lab_batch);
        terminal = supervised_loss(tape, g.logits, labels);
        break;
      }
      case 1: {
        name = "unsupervised";
        ModelGraph gs = build_forward_view(tape, mc, ids, strong_batch);
        terminal = unsupervised_loss(tape, gs.logits, pls, static_cast<double>(bu));
        break;
      }
      case 2: {
        name = "local-contrastive";
        ModelGraph gw = build_forward_view(tape, mc, ids, weak_batch);
        ModelGraph gs = build_forward_view(tape, mc, ids, strong_batch);
        terminal = local_contrastive_loss(tape, gw.embedding, gs.embedding, pseudo_ids,
                                          ccfg, sigma_t, true, true);
        break;
      }
      case 3: {
        name = "global-contrastive";
        ModelGraph gw = build_forward_view(tape, mc, ids, weak_batch);
        terminal = build_gcl(tape, ids, gw.embedding);
        break;
      }
      case 4: {
        name = "total";
        ModelGraph gl = build_forward_view(tape, mc, ids, lab_batch);
        ModelGraph gw = build_forward_view(tape, mc, ids, weak_batch);
        ModelGraph gs = build_forward_view(tape, mc, ids, strong_batch);
        NodeId ls = supervised_loss(tape, gl.logits, labels);
        NodeId lu = unsupervised_loss(tape, gs.logits, pls, static_cast<double>(bu));
        NodeId llc = local_contrastive_loss(tape, gw.embedding, gs.embedding, pseudo_ids,
                                            ccfg, sigma_t, true, true);
        NodeId lgc = build_gcl(tape, ids, gw.embedding);
        terminal = total_loss(tape, ls, lu, llc, lgc, 1.5, 0.25);
        break;
      }
    }
    GradCheckReport report = gradient_check(tape, terminal, step, tol);
    checks.push_back({name, report.max_rel_error, report.all_pass});
  }
  return checks;
}

}  // namespace

CheckLine verify_loss_gradients(std::size_t seed_count, double step, double tolerance) {
  CheckLine line;
  line.name = "loss-head gradients vs central differences";
  line.pass = true;
  double worst = 0.0;
  std::string worst_head;
  for (std::size_t s = 0; s < seed_count; ++s) {
    auto checks = check_heads_once(1000 + s, step, tolerance);
    for (const auto& c : checks) {
      if (c.max_rel > worst) {
        worst = c.max_rel;
        worst_head = c.head;
      }
      line.pass = line.pass && c.pass;
    }
  }
  std::ostringstream detail;
  detail << seed_count << " seeds x 5 heads, worst rel err " << worst << " (" << worst_head
         << ")";
  line.detail = detail.str();
  return line;
}

CheckLine verify_aggregation_oracle(std::size_t instances, std::uint64_t seed) {
  CheckLine line;
  line.name = "prototype aggregation vs brute-force weighted mean";
  line.pass = true;
  Rng rng(stream_seed(seed, 0, 0, "agg-oracle"));
  double worst = 0.0;
  for (std::size_t inst = 0; inst < instances; ++inst) {
    int k = static_cast<int>(rng.uniform_int(1, 4));
    int c = static_cast<int>(rng.uniform_int(2, 4));
    std::size_t d = static_cast<std::size_t>(rng.uniform_int(2, 8));
    std::vector<PrototypeBank> banks(static_cast<std::size_t>(k));
    for (auto& b : banks)
      for (int cls = 0; cls < c; ++cls) {
        if (rng.uniform() < 0.35) continue;  // this client lacks the class
        PrototypeBank::Entry e;
        e.count = static_cast<std::size_t>(rng.uniform_int(1, 10));
        e.vec.resize(d);
        for (double& v : e.vec) v = rng.gaussian(0.0, 1.0);
        b.classes[cls] = std::move(e);
      }
    PrototypeBank agg = aggregate_prototypes(banks);
    for (int cls = 0; cls < c; ++cls) {
      std::size_t total = 0;
      std::vector<double> mean(d, 0.0);
      for (const auto& b : banks) {
        auto it = b.classes.find(cls);
        if (it == b.classes.end()) continue;
        total += it->second.count;
        for (std::size_t j = 0; j < d; ++j)
          mean[j] += static_cast<double>(it->second.count) * it->second.vec[j];
      }
      auto it = agg.classes.find(cls);
      if (total == 0) {
        if (it != agg.classes.end()) line.pass = false;
        continue;
      }
      if (it == agg.classes.end()) {
        line.pass = false;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) {
        double expect = mean[j] / static_cast<double>(total);
        double err = std::fabs(it->second.vec[j] - expect);
        worst = std::max(worst, err);
        if (err > 1e-12) line.pass = false;
      }
      if (it->second.count != total) line.pass = false;
    }
  }
  std::ostringstream detail;
  detail << instances << " random instances, worst abs err " << worst;
  line.detail = detail.str();
  return line;
}

CheckLine verify_momentum_identities(std::uint64_t seed) {
  CheckLine line;
  line.name = "momentum update identities (kappa 0 / 0.5 / 1)";
  line.pass = true;
  Rng rng(stream_seed(seed, 0, 0, "momentum"));
  PrototypeBank prev, fresh;
  std::size_t d = 5;
  for (int cls = 0; cls < 3; ++cls) {
    PrototypeBank::Entry a, b;
    a.count = 4;
    b.count = 7;
    a.vec.resize(d);
    b.vec.resize(d);
    for (double& v : a.vec) v = rng.gaussian(0.0, 1.0);
    for (double& v : b.vec) v = rng.gaussian(0.0, 1.0);
    prev.classes[cls] = std::move(a);
    fresh.classes[cls] = std::move(b);
  }
  PrototypeBank k0 = momentum_update(prev, fresh, 0.0);
  PrototypeBank k1 = momentum_update(prev, fresh, 1.0);
  PrototypeBank kh = momentum_update(prev, fresh, 0.5);
  for (int cls = 0; cls < 3; ++cls) {
    for (std::size_t j = 0; j < d; ++j) {
      if (k0.classes[cls].vec[j] != fresh.classes[cls].vec[j]) line.pass = false;
      if (k1.classes[cls].vec[j] != prev.classes[cls].vec[j]) line.pass = false;
      double mid = 0.5 * prev.classes[cls].vec[j] + 0.5 * fresh.classes[cls].vec[j];
      if (kh.classes[cls].vec[j] != mid) line.pass = false;
    }
  }
  line.detail = "exact equality on 3 classes x 5 dims";
  return line;
}

CheckLine verify_ema_correction(std::uint64_t seed) {
  CheckLine line;
  line.name = "tracked variance applies the unbiased batch correction";
  Rng rng(stream_seed(seed, 0, 0, "ema-check"));
  int classes = 3;
  double m = 0.9;
  ConfidenceEMA tracked(classes, m);
  double ref_mean = 1.0 / 3.0, ref_var = 1.0;
  double uncorrected_var = 1.0;
  std::size_t batch = 8;
  for (int step = 0; step < 50; ++step) {
    std::vector<double> maxes;
    for (std::size_t i = 0; i < batch; ++i) maxes.push_back(rng.uniform(0.34, 0.99));
    ema_update(tracked, batch_confidence_stats_from_conf(maxes));
    double mean = 0.0;
    for (double v : maxes) mean += v;
    mean /= static_cast<double>(batch);
    double sample_var = 0.0;  // direct divide-by-(B-1) form
    for (double v : maxes) sample_var += (v - mean) * (v - mean);
    double biased = sample_var / static_cast<double>(batch);
    sample_var /= static_cast<double>(batch - 1);
    ref_mean = m * ref_mean + (1.0 - m) * mean;
    ref_var = m * ref_var + (1.0 - m) * sample_var;
    uncorrected_var = m * uncorrected_var + (1.0 - m) * biased;
  }
  double err = std::fabs(tracked.variance - ref_var) / std::max(1.0, std::fabs(ref_var));
  double mean_err = std::fabs(tracked.mean - ref_mean);
  double sensitivity = std::fabs(uncorrected_var - ref_var);
  line.pass = err < 1e-12 && mean_err < 1e-12 && sensitivity > 1e-6;
  std::ostringstream detail;
  detail << "trace err " << err << ", uncorrected trace diverges by " << sensitivity;
  line.detail = detail.str();
  return line;
}

CheckLine verify_bounds_check(std::size_t trials, std::size_t pool, int classes,
                              std::uint64_t seed) {
  CheckLine line;
  line.name = "quantity/quality bounds on randomized pools";
  BoundReport report = verify_weighting_bounds(trials, pool, classes, seed);
  line.pass = report.pass();
  std::ostringstream detail;
  detail << report.trials << " trials, " << report.violations << " violations";
  if (!report.failures.empty())
    detail << " (first: " << report.failures.front().reason << ")";
  line.detail = detail.str();
  return line;
}

}  // namespace ssfl

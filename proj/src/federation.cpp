#include "ssfl/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "ssfl/rng.hpp"

namespace ssfl {

namespace {

DenseArray stack_windows(const std::vector<const DenseArray*>& windows) {
  if (windows.empty()) throw std::logic_error("stack_windows: empty");
  std::size_t c = windows[0]->dim(0), l = windows[0]->dim(1);
  DenseArray out = DenseArray::zeros({windows.size(), c, l});
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i]->dim(0) != c || windows[i]->dim(1) != l)
      throw std::invalid_argument("stack_windows: inconsistent window shape");
    std::copy(windows[i]->data.begin(), windows[i]->data.end(),
              out.data.begin() + static_cast<long>(i * c * l));
  }
  return out;
}

struct BatchPlan {
  std::vector<std::size_t> labeled;    // dataset indices
  std::vector<std::size_t> unlabeled;  // dataset indices
};

// Labeled-first batches topped up with unlabeled samples, preserving the
// client's label rate in expectation; the final batch may run short.
std::vector<BatchPlan> plan_batches(const ClientSplit& split, std::size_t batch_size,
                                    Rng& rng) {
  std::vector<std::size_t> lab = split.labeled;
  std::vector<std::size_t> unl = split.unlabeled;
  rng.shuffle(lab);
  rng.shuffle(unl);
  std::size_t total = lab.size() + unl.size();
  if (total == 0) return {};
  std::size_t labeled_target = lab.empty()
      ? 0
      : std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(
                   static_cast<double>(batch_size) * static_cast<double>(lab.size()) /
                   static_cast<double>(total))));

  std::vector<BatchPlan> plans;
  std::size_t li = 0, ui = 0;
  while (li < lab.size() || ui < unl.size()) {
    BatchPlan plan;
    while (plan.labeled.size() < labeled_target && li < lab.size() &&
           plan.labeled.size() + plan.unlabeled.size() < batch_size)
      plan.labeled.push_back(lab[li++]);
    while (ui < unl.size() && plan.labeled.size() + plan.unlabeled.size() < batch_size)
      plan.unlabeled.push_back(unl[ui++]);
    while (li < lab.size() && plan.labeled.size() + plan.unlabeled.size() < batch_size)
      plan.labeled.push_back(lab[li++]);
    plans.push_back(std::move(plan));
  }
  return plans;
}

std::map<std::string, DenseArray> collect_gradients(const Tape& tape,
                                                    const std::map<std::string, NodeId>& ids) {
  std::map<std::string, DenseArray> grads;
  for (const auto& [name, id] : ids) grads.emplace(name, tape.adjoint(id));
  return grads;
}

void check_finite(double v, const char* component, int round, int client) {
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("non-finite ") + component + " at round " +
                             std::to_string(round) + " client " + std::to_string(client));
}

// Class means over batch rows, off-tape; used to pick the classes that can
// enter the prototype alignment term (norm above threshold, >= 1 row).
struct BatchClassMeans {
  std::vector<int> classes;
  std::vector<std::vector<std::size_t>> rows;  // row ids per class
};

BatchClassMeans batch_class_rows(const std::vector<int>& row_labels) {
  BatchClassMeans out;
  std::map<int, std::vector<std::size_t>> by;
  for (std::size_t r = 0; r < row_labels.size(); ++r) by[row_labels[r]].push_back(r);
  for (auto& [cls, rows] : by) {
    out.classes.push_back(cls);
    out.rows.push_back(std::move(rows));
  }
  return out;
}

}  // namespace

PrototypeBank compute_local_prototypes(const ClientState& client,
                                       const std::vector<SignalSample>& data,
                                       const FederationConfig& cfg,
                                       std::uint64_t run_seed, int round) {
  PrototypeBank bank;
  bank.round = round;
  // labeled samples: evaluation mode, no augmentation
  if (!client.split.labeled.empty()) {
    std::vector<const DenseArray*> windows;
    for (std::size_t idx : client.split.labeled) windows.push_back(&data[idx].window);
    EvalOut out = eval_forward(cfg.model, client.params, stack_windows(windows));
    std::size_t d = out.embeddings.dim(1);
    for (std::size_t i = 0; i < client.split.labeled.size(); ++i) {
      int cls = *data[client.split.labeled[i]].label;
      std::vector<double> emb(out.embeddings.data.begin() + static_cast<long>(i * d),
                              out.embeddings.data.begin() + static_cast<long>((i + 1) * d));
      bank.add(cls, emb);
    }
  }
  // unlabeled samples: weak view, grouped under the current pseudo label
  if (!client.split.unlabeled.empty()) {
    Rng aug_rng(stream_seed(run_seed, static_cast<std::uint64_t>(client.id),
                            static_cast<std::uint64_t>(round), "proto-aug"));
    std::vector<SignalSample> weak;
    weak.reserve(client.split.unlabeled.size());
    for (std::size_t idx : client.split.unlabeled)
      weak.push_back(weak_augment(data[idx], cfg.jitter_std, cfg.scale_lo, cfg.scale_hi,
                                  aug_rng));
    std::vector<const DenseArray*> windows;
    for (const auto& s : weak) windows.push_back(&s.window);
    EvalOut out = eval_forward(cfg.model, client.params, stack_windows(windows));
    DenseArray probs = softmax_rows(out.logits);
    std::size_t d = out.embeddings.dim(1);
    std::size_t c = probs.dim(1);
    for (std::size_t i = 0; i < weak.size(); ++i) {
      int best = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (probs.at2(i, j) > probs.at2(i, best)) best = static_cast<int>(j);
      std::vector<double> emb(out.embeddings.data.begin() + static_cast<long>(i * d),
                              out.embeddings.data.begin() + static_cast<long>((i + 1) * d));
      bank.add(best, emb);
    }
  }
  return bank;
}

RoundClientResult local_train_round(ClientState& client,
                                    const std::vector<SignalSample>& data,
                                    const PrototypeBank& global_bank, int round,
                                    const FederationConfig& cfg, std::uint64_t run_seed) {
  auto started = std::chrono::steady_clock::now();
  RoundClientResult result;
  MetricsRecord& rec = result.metrics;
  rec.round = round;
  rec.client = client.id;

  Rng batch_rng(stream_seed(run_seed, static_cast<std::uint64_t>(client.id),
                            static_cast<std::uint64_t>(round), "batches"));
  Rng aug_rng(stream_seed(run_seed, static_cast<std::uint64_t>(client.id),
                          static_cast<std::uint64_t>(round), "augment"));
  std::vector<BatchPlan> plans = plan_batches(client.split, cfg.batch_size, batch_rng);

  bool semi = cfg.method != Method::kFedAvgSupervised;
  double eta_t = eta(static_cast<double>(round), cfg.schedule);
  bool contrastive_on = cfg.method == Method::kPrototypeSemi;

  double sum_ls = 0.0, sum_lu = 0.0, sum_llc = 0.0, sum_lgc = 0.0, sum_total = 0.0;
  double lambda_sum = 0.0, lambda_correct = 0.0;
  std::size_t unlabeled_seen = 0;
  std::size_t batches = 0;

  for (const BatchPlan& plan : plans) {
    std::size_t e = plan.labeled.size();
    std::size_t bu = semi ? plan.unlabeled.size() : 0;
    if (e == 0 && bu == 0) continue;
    std::size_t b = e + plan.unlabeled.size();

    Tape tape;
    auto param_ids = add_parameters(tape, client.params, true);

    NodeId ls = -1, lu = -1, llc = -1, lgc = -1;
    ModelGraph lab_graph, weak_graph, strong_graph;
    std::vector<int> lab_labels;

    if (e > 0) {
      std::vector<const DenseArray*> windows;
      for (std::size_t idx : plan.labeled) {
        windows.push_back(&data[idx].window);
        lab_labels.push_back(*data[idx].label);
      }
      lab_graph = build_forward_view(tape, cfg.model, param_ids, stack_windows(windows));
      ls = supervised_loss(tape, lab_graph.logits, lab_labels);
    }

    std::vector<PseudoLabel> pls;
    if (bu > 0) {
      std::vector<SignalSample> weak, strong;
      weak.reserve(bu);
      strong.reserve(bu);
      for (std::size_t idx : plan.unlabeled) {
        weak.push_back(weak_augment(data[idx], cfg.jitter_std, cfg.scale_lo, cfg.scale_hi,
                                    aug_rng));
        strong.push_back(strong_augment(data[idx], cfg.max_segments,
                                        cfg.strong_jitter_std, aug_rng));
      }
      std::vector<const DenseArray*> wv, sv;
      for (const auto& s : weak) wv.push_back(&s.window);
      for (const auto& s : strong) sv.push_back(&s.window);
      weak_graph = build_forward_view(tape, cfg.model, param_ids, stack_windows(wv));
      strong_graph = build_forward_view(tape, cfg.model, param_ids, stack_windows(sv));

      // weak-view probabilities leave the tape here: pseudo labels and
      // weights below are constants, gradients flow only via strong logits
      DenseArray probs = softmax_rows(tape.value(weak_graph.logits));
      std::vector<DenseArray> rows;
      rows.reserve(bu);
      for (std::size_t i = 0; i < bu; ++i) {
        DenseArray row = DenseArray::zeros({probs.dim(1)});
        for (std::size_t j = 0; j < probs.dim(1); ++j) row.data[j] = probs.at2(i, j);
        rows.push_back(std::move(row));
      }
      ema_update(client.ema, batch_confidence_stats(rows));
      pls = pseudo_labels(rows, client.ema, cfg.weighting);
      if (cfg.method == Method::kFixmatchThreshold) {
        for (auto& pl : pls)
          pl.weight = pl.max_prob >= cfg.threshold ? cfg.weighting.lambda_max : 0.0;
      } else if (!cfg.use_laplace_weighting) {
        for (auto& pl : pls) pl.weight = cfg.weighting.lambda_max;
      }
      lu = unsupervised_loss(tape, strong_graph.logits, pls, static_cast<double>(bu));

      for (std::size_t i = 0; i < bu; ++i) {
        lambda_sum += pls[i].weight;
        int truth = *data[plan.unlabeled[i]].label;  // quality oracle only
        if (pls[i].label == truth) lambda_correct += pls[i].weight;
      }
      unlabeled_seen += bu;

      if (contrastive_on && cfg.use_local_contrastive && bu >= 2) {
        std::vector<int> pseudo_ids;
        for (const auto& pl : pls) pseudo_ids.push_back(pl.label);
        bool all_same =
            std::all_of(pseudo_ids.begin(), pseudo_ids.end(),
                        [&](int v) { return v == pseudo_ids[0]; });
        if (all_same && cfg.pair_by_pseudo_label && !client.lcl_degenerate_logged) {
          std::cerr << "[client " << client.id << "] round " << round
                    << ": all pseudo labels equal, local contrastive term is 0\n";
          client.lcl_degenerate_logged = true;
        }
        llc = local_contrastive_loss(tape, weak_graph.embedding, strong_graph.embedding,
                                     pseudo_ids, cfg.contrastive, client.ema.stddev(),
                                     cfg.pair_by_pseudo_label, cfg.dynamic_temperature);
      }
    }

    double iota_t = iota(e, b);
    if (contrastive_on && cfg.use_global_contrastive && !global_bank.empty() &&
        iota_t > 0.0) {
      // batch prototypes: labeled rows under their true class plus weak rows
      // under their pseudo label, restricted to classes the global bank has
      std::vector<int> row_labels = lab_labels;
      for (const auto& pl : pls) row_labels.push_back(pl.label);
      std::vector<NodeId> embed_parts;
      if (e > 0) embed_parts.push_back(lab_graph.embedding);
      if (bu > 0) embed_parts.push_back(weak_graph.embedding);
      NodeId all_emb =
          embed_parts.size() == 1 ? embed_parts[0] : tape.concat_rows(embed_parts);

      BatchClassMeans groups = batch_class_rows(row_labels);
      std::size_t nrows = row_labels.size();
      std::size_t d = tape.value(all_emb).dim(1);
      std::vector<int> keep;
      std::vector<std::vector<std::size_t>> keep_rows;
      for (std::size_t gi = 0; gi < groups.classes.size(); ++gi) {
        int cls = groups.classes[gi];
        auto git = global_bank.classes.find(cls);
        if (git == global_bank.classes.end()) continue;
        // drop classes whose batch-mean embedding collapses to ~zero
        std::vector<double> mean(d, 0.0);
        for (std::size_t r : groups.rows[gi])
          for (std::size_t j = 0; j < d; ++j)
            mean[j] += tape.value(all_emb).at2(r, j);
        double norm = 0.0;
        for (double v : mean) norm += v * v;
        norm = std::sqrt(norm) / static_cast<double>(groups.rows[gi].size());
        if (norm < 1e-9) continue;
        double gnorm = 0.0;
        for (double v : git->second.vec) gnorm += v * v;
        if (std::sqrt(gnorm) < 1e-9) continue;
        keep.push_back(cls);
        keep_rows.push_back(groups.rows[gi]);
      }
      if (keep.size() >= 2) {
        DenseArray selector = DenseArray::zeros({keep.size(), nrows});
        DenseArray globals = DenseArray::zeros({keep.size(), d});
        for (std::size_t gi = 0; gi < keep.size(); ++gi) {
          double w = 1.0 / static_cast<double>(keep_rows[gi].size());
          for (std::size_t r : keep_rows[gi]) selector.at2(gi, r) = w;
          const auto& vec = global_bank.classes.at(keep[gi]).vec;
          for (std::size_t j = 0; j < d; ++j) globals.at2(gi, j) = vec[j];
        }
        NodeId local_protos =
            tape.affine(tape.constant(std::move(selector)), all_emb,
                        tape.constant(DenseArray::zeros({d})));
        lgc = global_contrastive_loss(tape, local_protos, globals, cfg.contrastive,
                                      client.ema.stddev(), cfg.dynamic_temperature);
      }
    }

    NodeId total = total_loss(tape, ls, lu, llc, lgc, eta_t, iota_t);
    double v_ls = ls >= 0 ? tape.value(ls).data[0] : 0.0;
    double v_lu = lu >= 0 ? tape.value(lu).data[0] : 0.0;
    double v_llc = llc >= 0 ? tape.value(llc).data[0] : 0.0;
    double v_lgc = lgc >= 0 ? tape.value(lgc).data[0] : 0.0;
    double v_total = tape.value(total).data[0];
    check_finite(v_ls, "supervised loss", round, client.id);
    check_finite(v_lu, "unsupervised loss", round, client.id);
    check_finite(v_llc, "local contrastive loss", round, client.id);
    check_finite(v_lgc, "global contrastive loss", round, client.id);
    check_finite(v_total, "total loss", round, client.id);

    tape.backpropagate(total);
    client.opt.step(client.params, collect_gradients(tape, param_ids));

    sum_ls += v_ls;
    sum_lu += v_lu;
    sum_llc += v_llc;
    sum_lgc += v_lgc;
    sum_total += v_total;
    ++batches;
  }

  if (batches > 0) {
    rec.loss_s = sum_ls / static_cast<double>(batches);
    rec.loss_u = sum_lu / static_cast<double>(batches);
    rec.loss_lc = sum_llc / static_cast<double>(batches);
    rec.loss_gc = sum_lgc / static_cast<double>(batches);
    rec.loss_total = sum_total / static_cast<double>(batches);
  }
  rec.mu_hat = client.ema.mean;
  rec.sigma2_hat = client.ema.variance;
  if (unlabeled_seen > 0) {
    rec.f_p = lambda_sum / static_cast<double>(unlabeled_seen);
    rec.mean_lambda = rec.f_p;
    rec.g_p = lambda_sum > 0.0 ? lambda_correct / lambda_sum : 0.0;
  }

  if (cfg.method == Method::kPrototypeSemi)
    result.local_bank = compute_local_prototypes(client, data, cfg, run_seed, round);
  result.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - started)
                       .count();
  return result;
}

void fine_tune(ClientState& client, const std::vector<SignalSample>& data,
               const FederationConfig& cfg, std::uint64_t run_seed, int epochs) {
  if (client.split.labeled.empty()) {
    std::cerr << "[client " << client.id << "] fine-tune skipped: no labeled samples\n";
    return;
  }
  for (int epoch = 0; epoch < epochs; ++epoch) {
    Rng rng(stream_seed(run_seed, static_cast<std::uint64_t>(client.id),
                        static_cast<std::uint64_t>(epoch), "fine-tune"));
    std::vector<std::size_t> order = client.split.labeled;
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const DenseArray*> windows;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        windows.push_back(&data[order[i]].window);
        labels.push_back(*data[order[i]].label);
      }
      Tape tape;
      auto param_ids = add_parameters(tape, client.params, true);
      ModelGraph g = build_forward_view(tape, cfg.model, param_ids, stack_windows(windows));
      NodeId loss = supervised_loss(tape, g.logits, labels);
      check_finite(tape.value(loss).data[0], "fine-tune loss", -1, client.id);
      tape.backpropagate(loss);
      client.opt.step(client.params, collect_gradients(tape, param_ids));
    }
  }
}

EvalResult evaluate(const ClientState& client, const std::vector<SignalSample>& data,
                    const FederationConfig& cfg) {
  EvalResult res;
  const auto& test = client.split.test;
  if (test.empty()) throw std::invalid_argument("evaluate: empty test split");
  std::size_t classes = static_cast<std::size_t>(cfg.model.classes);
  res.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  const std::size_t chunk = 64;
  for (std::size_t start = 0; start < test.size(); start += chunk) {
    std::size_t end = std::min(test.size(), start + chunk);
    std::vector<const DenseArray*> windows;
    for (std::size_t i = start; i < end; ++i) windows.push_back(&data[test[i]].window);
    EvalOut out = eval_forward(cfg.model, client.params, stack_windows(windows));
    std::size_t c = out.logits.dim(1);
    for (std::size_t i = 0; i < windows.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t j = 1; j < c; ++j)
        if (out.logits.at2(i, j) > out.logits.at2(i, best)) best = j;
      int truth = *data[test[start + i]].label;
      res.confusion[static_cast<std::size_t>(truth)][best] += 1;
      if (best == static_cast<std::size_t>(truth)) ++correct;
    }
  }
  res.total = test.size();
  res.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  res.per_class_accuracy.assign(classes, 0.0);
  for (std::size_t t = 0; t < classes; ++t) {
    std::size_t row_total = 0;
    for (std::size_t p = 0; p < classes; ++p) row_total += res.confusion[t][p];
    if (row_total > 0)
      res.per_class_accuracy[t] =
          static_cast<double>(res.confusion[t][t]) / static_cast<double>(row_total);
  }
  return res;
}

ModelParams average_params(const std::vector<ModelParams>& params,
                           const std::vector<std::size_t>& weights) {
  if (params.empty() || params.size() != weights.size())
    throw std::invalid_argument("average_params: size mismatch");
  double total = 0.0;
  for (std::size_t w : weights) total += static_cast<double>(w);
  if (total <= 0.0) throw std::invalid_argument("average_params: zero total weight");
  ModelParams avg = params[0];
  for (auto& e : avg.entries) e.array.fill(0.0);
  for (std::size_t k = 0; k < params.size(); ++k) {
    double w = static_cast<double>(weights[k]) / total;
    for (std::size_t pi = 0; pi < avg.entries.size(); ++pi) {
      const auto& src = params[k].entries[pi];
      if (src.name != avg.entries[pi].name || !src.array.same_shape(avg.entries[pi].array))
        throw std::invalid_argument("average_params: parameter layout mismatch");
      for (std::size_t j = 0; j < src.array.size(); ++j)
        avg.entries[pi].array.data[j] += w * src.array.data[j];
    }
  }
  return avg;
}

RunArtifact run_training(const std::vector<SignalSample>& data,
                         const std::vector<ClientSplit>& splits,
                         const FederationConfig& cfg, std::uint64_t run_seed) {
  auto run_started = std::chrono::steady_clock::now();
  int k = static_cast<int>(splits.size());
  if (k == 0) throw std::invalid_argument("run_training: no clients");
  if (cfg.stragglers < 0 || cfg.stragglers >= k)
    throw std::invalid_argument("run_training: straggler count must lie in [0, clients)");

  RunArtifact art;
  std::vector<ClientState> clients;
  ModelParams init = ModelParams::init(cfg.model, run_seed);
  art.model_snapshot_bytes = encode_snapshot(init.entries).size();
  for (int i = 0; i < k; ++i) {
    ClientState c;
    c.id = i;
    c.params = init;
    c.split = splits[static_cast<std::size_t>(i)];
    c.ema = ConfidenceEMA(cfg.model.classes, cfg.ema_momentum);
    c.opt = AdamOptimizer(cfg.learning_rate, cfg.beta1, cfg.beta2);
    clients.push_back(std::move(c));
  }

  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  std::size_t threads = cfg.threads > 0 ? static_cast<std::size_t>(cfg.threads)
                                        : std::min<std::size_t>(hw, clients.size());

  PrototypeBank global_bank;
  int rounds = static_cast<int>(cfg.schedule.total_rounds);
  for (int t = 1; t <= rounds; ++t) {
    // stragglers keep training and receive the downlink; only their uplink
    // is dropped this round
    std::vector<int> ids(clients.size());
    for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
    if (cfg.stragglers > 0) {
      Rng rng(stream_seed(run_seed, 0, static_cast<std::uint64_t>(t), "stragglers"));
      rng.shuffle(ids);
    }
    std::vector<bool> straggler(clients.size(), false);
    for (int s = 0; s < cfg.stragglers; ++s) straggler[static_cast<std::size_t>(ids[s])] = true;

    std::vector<RoundClientResult> results(clients.size());
    {
      std::vector<std::thread> pool;
      std::size_t next = 0;
      std::mutex mu;
      auto worker = [&]() {
        while (true) {
          std::size_t i;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (next >= clients.size()) return;
            i = next++;
          }
          results[i] = local_train_round(clients[i], data, global_bank, t, cfg, run_seed);
        }
      };
      if (threads <= 1) {
        worker();
      } else {
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
      }
    }

    // uplink + aggregation, canonical client order
    std::vector<PrototypeBank> uplinks;
    for (std::size_t i = 0; i < clients.size(); ++i) {
      if (straggler[i]) continue;
      if (cfg.method == Method::kPrototypeSemi) {
        std::size_t bytes = encode_uplink(results[i].local_bank).size();
        results[i].metrics.uplink_bytes = bytes;
        art.uplink_bytes_total += bytes;
        uplinks.push_back(results[i].local_bank);
      } else {
        results[i].metrics.uplink_bytes = art.model_snapshot_bytes;
        art.uplink_bytes_total += art.model_snapshot_bytes;
      }
    }

    if (cfg.method == Method::kPrototypeSemi) {
      if (!uplinks.empty()) {
        PrototypeBank fresh = aggregate_prototypes(uplinks, cfg.agg_contributor_mean);
        global_bank = momentum_update(global_bank, fresh, cfg.kappa);
      } else {
        std::cerr << "round " << t << ": no uplinks, aggregation skipped\n";
      }
    } else {
      std::vector<ModelParams> participating;
      std::vector<std::size_t> weights;
      for (std::size_t i = 0; i < clients.size(); ++i) {
        if (straggler[i]) continue;
        participating.push_back(clients[i].params);
        std::size_t n = clients[i].split.labeled.size();
        if (cfg.method == Method::kFixmatchThreshold) n += clients[i].split.unlabeled.size();
        weights.push_back(std::max<std::size_t>(n, 1));
      }
      if (!participating.empty()) {
        ModelParams avg = average_params(participating, weights);
        for (auto& c : clients) c.params = avg;
      } else {
        std::cerr << "round " << t << ": no uplinks, aggregation skipped\n";
      }
    }

    for (std::size_t i = 0; i < clients.size(); ++i) {
      results[i].metrics.accuracy = evaluate(clients[i], data, cfg).accuracy;
      art.metrics.push_back(results[i].metrics);
      art.timings.push_back({t, results[i].wall_ms});
    }
    if (t == rounds && cfg.method == Method::kPrototypeSemi)
      for (auto& r : results) art.client_banks.push_back(std::move(r.local_bank));
  }

  if (cfg.method == Method::kPrototypeSemi && cfg.fine_tune_epochs > 0) {
    for (auto& c : clients)
      fine_tune(c, data, cfg, run_seed, cfg.fine_tune_epochs);
  }

  std::size_t weighted_total = 0;
  double weighted_correct = 0.0;
  for (auto& c : clients) {
    EvalResult res = evaluate(c, data, cfg);
    art.client_accuracy.push_back(res.accuracy);
    art.client_test_sizes.push_back(res.total);
    weighted_total += res.total;
    weighted_correct += res.accuracy * static_cast<double>(res.total);
  }
  art.accuracy = weighted_correct / static_cast<double>(weighted_total);
  art.global_bank = global_bank;
  for (auto& c : clients) art.final_params.push_back(c.params);
  art.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                   run_started)
                         .count();
  return art;
}

}  // namespace ssfl

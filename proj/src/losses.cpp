#include "ssfl/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace ssfl {

namespace {

DenseArray one_hot_rows(const std::vector<int>& labels, std::size_t classes) {
  DenseArray t = DenseArray::zeros({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(classes) + ")");
    t.data[i * classes + static_cast<std::size_t>(y)] = 1.0;
  }
  return t;
}

}  // namespace

NodeId supervised_loss(Tape& tape, NodeId logits, const std::vector<int>& labels) {
  const DenseArray& lv = tape.value(logits);
  if (labels.empty() || lv.dim(0) != labels.size())
    throw std::invalid_argument("supervised_loss: row/label count mismatch");
  DenseArray targets = one_hot_rows(labels, lv.dim(1));
  DenseArray weights = DenseArray::full({labels.size()}, 1.0);
  return tape.softmax_xent(logits, std::move(targets), std::move(weights),
                           static_cast<double>(labels.size()));
}

NodeId unsupervised_loss(Tape& tape, NodeId strong_logits,
                         const std::vector<PseudoLabel>& pseudo, double normalizer) {
  const DenseArray& lv = tape.value(strong_logits);
  if (pseudo.empty() || lv.dim(0) != pseudo.size())
    throw std::invalid_argument("unsupervised_loss: row/pseudo count mismatch");
  std::vector<int> labels;
  DenseArray weights = DenseArray::zeros({pseudo.size()});
  labels.reserve(pseudo.size());
  for (std::size_t i = 0; i < pseudo.size(); ++i) {
    labels.push_back(pseudo[i].label);
    weights.data[i] = pseudo[i].weight;
  }
  DenseArray targets = one_hot_rows(labels, lv.dim(1));
  return tape.softmax_xent(strong_logits, std::move(targets), std::move(weights), normalizer);
}

NodeId local_contrastive_loss(Tape& tape, NodeId weak_embeddings,
                              NodeId strong_embeddings, const std::vector<int>& pseudo,
                              const ContrastiveConfig& cfg, double sigma_t,
                              bool pair_by_pseudo_label, bool dynamic_temp) {
  const DenseArray& wv = tape.value(weak_embeddings);
  std::size_t b = wv.dim(0);
  if (b != tape.value(strong_embeddings).dim(0) || b != pseudo.size())
    throw std::invalid_argument("local_contrastive_loss: row count mismatch");
  if (b < 1) throw std::invalid_argument("local_contrastive_loss: empty batch");

  double tau = dynamic_temperature(cfg, sigma_t, dynamic_temp);
  if (tau <= 0.0) throw std::invalid_argument("local_contrastive_loss: temperature <= 0");

  NodeId sim = tape.cosine_similarity(weak_embeddings, strong_embeddings);
  NodeId expsim = tape.exp_of(tape.scale(sim, 1.0 / tau));

  DenseArray pos_mask = DenseArray::zeros({b, b});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j) {
      bool positive = pair_by_pseudo_label ? pseudo[i] == pseudo[j] : i == j;
      if (positive) pos_mask.at2(i, j) = 1.0;
    }

  NodeId numer = tape.row_sum(tape.mul(expsim, tape.constant(std::move(pos_mask))));
  NodeId denom = tape.row_sum(expsim);
  NodeId per_row = tape.add(tape.log_of(denom), tape.scale(tape.log_of(numer), -1.0));
  return tape.mean_all(per_row);
}

NodeId global_contrastive_loss(Tape& tape, NodeId local_protos,
                               const DenseArray& global_protos,
                               const ContrastiveConfig& cfg, double sigma_t,
                               bool dynamic_temp) {
  const DenseArray& lv = tape.value(local_protos);
  std::size_t c = lv.dim(0);
  if (global_protos.rank() != 2 || global_protos.dim(0) != c ||
      global_protos.dim(1) != lv.dim(1))
    throw std::invalid_argument("global_contrastive_loss: prototype banks misaligned");
  if (c < 2)
    throw std::invalid_argument("global_contrastive_loss: needs at least 2 classes");

  double tau = dynamic_temperature(cfg, sigma_t, dynamic_temp);
  if (tau <= 0.0) throw std::invalid_argument("global_contrastive_loss: temperature <= 0");

  NodeId globals = tape.constant(global_protos);
  NodeId sim = tape.cosine_similarity(local_protos, globals);
  NodeId scaled = tape.scale(sim, 1.0 / tau);

  DenseArray eye = DenseArray::zeros({c, c});
  DenseArray off = DenseArray::full({c, c}, 1.0);
  for (std::size_t i = 0; i < c; ++i) {
    eye.at2(i, i) = 1.0;
    off.at2(i, i) = 0.0;
  }
  // diagonal terms: sim(P_i, G_i)/tau, recovered by a masked row sum
  NodeId diag = tape.row_sum(tape.mul(scaled, tape.constant(std::move(eye))));
  NodeId denom =
      tape.row_sum(tape.mul(tape.exp_of(scaled), tape.constant(std::move(off))));
  NodeId per_class = tape.add(tape.log_of(denom), tape.scale(diag, -1.0));
  return tape.sum_all(per_class);
}

NodeId total_loss(Tape& tape, NodeId ls, NodeId lu, NodeId llc, NodeId lgc,
                  double eta_t, double iota_t) {
  NodeId acc = -1;
  auto accumulate = [&](NodeId term, double coeff) {
    if (term < 0 || coeff == 0.0) return;
    NodeId scaled = coeff == 1.0 ? term : tape.scale(term, coeff);
    acc = acc < 0 ? scaled : tape.add(acc, scaled);
  };
  accumulate(ls, 1.0);
  accumulate(lu, eta_t);
  accumulate(llc, 1.0);
  accumulate(lgc, iota_t);
  if (acc < 0) acc = tape.constant(DenseArray::scalar(0.0));
  return acc;
}

DenseArray softmax_rows(const DenseArray& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_rows: expects (n,c)");
  std::size_t n = logits.dim(0), c = logits.dim(1);
  DenseArray out = DenseArray::zeros({n, c});
  for (std::size_t r = 0; r < n; ++r) {
    const double* row = &logits.data[r * c];
    double mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
    for (std::size_t j = 0; j < c; ++j) out.data[r * c + j] = std::exp(row[j] - mx) / z;
  }
  return out;
}

}  // namespace ssfl

#pragma once

#include <vector>

#include "ssfl/tape.hpp"
#include "ssfl/weighting.hpp"

namespace ssfl {

struct ContrastiveConfig {
  double tau = 0.5;    // base temperature
  double alpha = 1.0;  // dynamic-temperature scaling factor
};

inline double dynamic_temperature(const ContrastiveConfig& cfg, double sigma_t,
                                  bool enabled) {
  return enabled ? cfg.tau * (1.0 + cfg.alpha * sigma_t) : cfg.tau;
}

// Mean cross-entropy over labeled rows.
NodeId supervised_loss(Tape& tape, NodeId logits, const std::vector<int>& labels);

// Weighted cross-entropy against one-hot pseudo labels; gradient flows only
// through the strong-view logits (labels and weights enter as constants).
NodeId unsupervised_loss(Tape& tape, NodeId strong_logits,
                         const std::vector<PseudoLabel>& pseudo, double normalizer);

// InfoNCE between weak anchors and strong views. With pair_by_pseudo_label
// the positive set of row i is every strong row sharing its pseudo label
// (own view included); without it only the own view is positive.
NodeId local_contrastive_loss(Tape& tape, NodeId weak_embeddings,
                              NodeId strong_embeddings, const std::vector<int>& pseudo,
                              const ContrastiveConfig& cfg, double sigma_t,
                              bool pair_by_pseudo_label, bool dynamic_temp);

// Prototype alignment: rows of local/global must be the same class order.
// The denominator of each term excludes its own class.
NodeId global_contrastive_loss(Tape& tape, NodeId local_protos,
                               const DenseArray& global_protos,
                               const ContrastiveConfig& cfg, double sigma_t,
                               bool dynamic_temp);

// L_s + eta * L_u + L_lc + iota * L_gc; pass -1 for absent terms.
NodeId total_loss(Tape& tape, NodeId ls, NodeId lu, NodeId llc, NodeId lgc,
                  double eta_t, double iota_t);

// Softmax over rows, off-tape (inference / pseudo-label probabilities).
DenseArray softmax_rows(const DenseArray& logits);

}  // namespace ssfl

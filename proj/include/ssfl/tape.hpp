#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssfl/dense_array.hpp"

namespace ssfl {

using NodeId = int;

enum class OpKind {
  kLeaf,            // input / parameter / constant
  kAffine,          // (n,k) @ (k,m) + bias(m)
  kConv1d,          // (n,cin,l) * (cout,cin,k) + bias(cout)
  kRelu,
  kMaxPool1d,
  kGlobalMeanPool,  // (n,c,l) -> (n,c)
  kSoftmaxXent,     // fused: weighted mean cross-entropy, scalar
  kL2Normalize,     // rows of (n,d)
  kCosineSim,       // (n,d),(m,d) -> (n,m)
  kAdd,
  kMul,
  kScale,
  kExp,
  kLog,
  kSumAll,
  kMeanAll,
  kRowSum,          // (n,m) -> (n)
  kConcatRows,      // stack (ni,d) blocks -> (sum ni, d)
};

const char* op_name(OpKind k);

struct TapeNode {
  OpKind kind = OpKind::kLeaf;
  std::vector<NodeId> parents;
  DenseArray value;
  DenseArray adjoint;   // zeroed before each backward pass
  bool trainable = false;
  std::string name;     // leaves only

  // operator attributes
  int stride = 1;
  int padding = 0;
  int window = 1;
  double scalar = 0.0;

  // cached forward state (softmax probabilities, pool argmax, targets, ...)
  DenseArray aux;
  DenseArray aux2;
  DenseArray probs;
  std::vector<std::size_t> arg_index;
};

// Append-only record of a differentiable computation. Nodes are created
// eagerly (forward value computed at build time); evaluate() re-runs the
// forward pass, which gradient checking uses after poking parameter values.
class Tape {
 public:
  NodeId leaf(std::string name, DenseArray value, bool trainable);
  NodeId input(std::string name, DenseArray value) {
    return leaf(std::move(name), std::move(value), false);
  }
  NodeId parameter(std::string name, DenseArray value) {
    return leaf(std::move(name), std::move(value), true);
  }
  NodeId constant(DenseArray value) { return leaf("", std::move(value), false); }

  NodeId affine(NodeId x, NodeId w, NodeId b);
  NodeId conv1d(NodeId x, NodeId w, NodeId b, int stride, int padding);
  NodeId relu(NodeId x);
  NodeId maxpool1d(NodeId x, int window);
  NodeId global_mean_pool(NodeId x);
  // targets: (n,c) rows summing to 1; row_weights: (n); loss = sum_i w_i*CE_i / normalizer
  NodeId softmax_xent(NodeId logits, DenseArray targets, DenseArray row_weights,
                      double normalizer);
  NodeId l2_normalize(NodeId x);
  NodeId cosine_similarity(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId exp_of(NodeId a);
  NodeId log_of(NodeId a);
  NodeId sum_all(NodeId a);
  NodeId mean_all(NodeId a);
  NodeId row_sum(NodeId a);
  NodeId concat_rows(const std::vector<NodeId>& parts);

  std::size_t node_count() const { return nodes_.size(); }
  const TapeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const DenseArray& value(NodeId id) const { return node(id).value; }
  const DenseArray& adjoint(NodeId id) const { return node(id).adjoint; }

  void set_leaf_value(NodeId id, DenseArray value);
  // Poke one entry of a leaf (gradient checking).
  void nudge_leaf(NodeId id, std::size_t flat_index, double delta);

  // Re-run the forward pass up to and including `terminal`; returns its value.
  // Pure in (tape, leaf values): repeated calls are bit-identical.
  const DenseArray& evaluate(NodeId terminal);

  // Reverse pass from a scalar terminal. Adjoints of all nodes are reset
  // first; afterwards each trainable leaf's adjoint holds d(terminal)/d(leaf).
  void backpropagate(NodeId terminal);

  // Signature of the piecewise-linear region the forward pass landed in
  // (relu activation pattern + pool argmax choices). Two evaluations in the
  // same region share a signature; gradient checking uses this to exclude
  // kink crossings.
  std::uint64_t kink_signature() const;

  std::vector<NodeId> trainable_ids() const;

 private:
  NodeId push(TapeNode n);
  void forward_node(std::size_t i);
  void backward_node(std::size_t i);

  std::vector<TapeNode> nodes_;
};

// --- gradient checking ---------------------------------------------------

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass = true;
  double max_rel_error = 0.0;
};

// Central finite differences on every trainable leaf against the analytic
// adjoints. Entries whose perturbation crosses a relu/pool kink are skipped.
GradCheckReport gradient_check(Tape& tape, NodeId terminal, double step,
                               double tolerance);

}  // namespace ssfl

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ssfl/dense_array.hpp"
#include "ssfl/serialize.hpp"
#include "ssfl/tape.hpp"

namespace ssfl {

// Reduced 1-D conv encoder: conv/relu/maxpool stack, global mean pool,
// two-layer projection head (embeddings live in its output space), and a
// linear classifier on the embedding.
struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t window_length = 256;
  std::vector<std::size_t> conv_channels = {16, 32};
  int kernel = 8;
  int padding = 4;
  int pool = 2;
  std::size_t proj_hidden = 64;
  std::size_t embed_dim = 32;
  int classes = 3;
};

// Named parameter arrays; ordering is fixed so snapshots and aggregation
// are stable across clients.
struct ModelParams {
  std::vector<NamedArray> entries;

  DenseArray& get(const std::string& name);
  const DenseArray& get(const std::string& name) const;
  std::size_t scalar_count() const;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
};

struct ModelGraph {
  NodeId input = -1;
  NodeId embedding = -1;  // (batch, embed_dim)
  NodeId logits = -1;     // (batch, classes)
  std::map<std::string, NodeId> param_ids;
};

// Parameters as leaves; several forward views on one tape share them so
// their gradients accumulate.
std::map<std::string, NodeId> add_parameters(Tape& tape, const ModelParams& params,
                                             bool trainable);

ModelGraph build_forward_view(Tape& tape, const ModelConfig& cfg,
                              const std::map<std::string, NodeId>& param_ids,
                              DenseArray batch);

// Builds the forward graph for a batch (batch, channels, length). Parameters
// become trainable leaves unless frozen.
ModelGraph build_forward(Tape& tape, const ModelConfig& cfg, const ModelParams& params,
                         DenseArray batch, bool trainable = true);

// Off-tape convenience: embeddings and logits for a batch in eval mode.
struct EvalOut {
  DenseArray embeddings;
  DenseArray logits;
};
EvalOut eval_forward(const ModelConfig& cfg, const ModelParams& params,
                     const DenseArray& batch);

}  // namespace ssfl

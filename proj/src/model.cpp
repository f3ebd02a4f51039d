#include "ssfl/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ssfl/rng.hpp"

namespace ssfl {

DenseArray& ModelParams::get(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return e.array;
  throw std::out_of_range("ModelParams: no parameter " + name);
}

const DenseArray& ModelParams::get(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.array;
  throw std::out_of_range("ModelParams: no parameter " + name);
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.array.size();
  return n;
}

namespace {

DenseArray he_init(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
  DenseArray a = DenseArray::zeros(std::move(shape));
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (double& v : a.data) v = rng.gaussian(0.0, std);
  return a;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  if (cfg.conv_channels.empty()) throw std::invalid_argument("model: no conv layers");
  Rng rng(stream_seed(seed, 0, 0, "init"));
  ModelParams p;
  std::size_t cin = cfg.in_channels;
  std::size_t k = static_cast<std::size_t>(cfg.kernel);
  for (std::size_t layer = 0; layer < cfg.conv_channels.size(); ++layer) {
    std::size_t cout = cfg.conv_channels[layer];
    std::string id = std::to_string(layer);
    p.entries.push_back({"conv" + id + "_w", he_init({cout, cin, k}, cin * k, rng)});
    p.entries.push_back({"conv" + id + "_b", DenseArray::zeros({cout})});
    cin = cout;
  }
  std::size_t feat = cfg.conv_channels.back();
  p.entries.push_back({"proj0_w", he_init({feat, cfg.proj_hidden}, feat, rng)});
  p.entries.push_back({"proj0_b", DenseArray::zeros({cfg.proj_hidden})});
  p.entries.push_back({"proj1_w", he_init({cfg.proj_hidden, cfg.embed_dim}, cfg.proj_hidden, rng)});
  p.entries.push_back({"proj1_b", DenseArray::zeros({cfg.embed_dim})});
  p.entries.push_back(
      {"cls_w", he_init({cfg.embed_dim, static_cast<std::size_t>(cfg.classes)}, cfg.embed_dim, rng)});
  p.entries.push_back({"cls_b", DenseArray::zeros({static_cast<std::size_t>(cfg.classes)})});
  return p;
}

std::map<std::string, NodeId> add_parameters(Tape& tape, const ModelParams& params,
                                             bool trainable) {
  std::map<std::string, NodeId> ids;
  for (const auto& e : params.entries) ids[e.name] = tape.leaf(e.name, e.array, trainable);
  return ids;
}

ModelGraph build_forward_view(Tape& tape, const ModelConfig& cfg,
                              const std::map<std::string, NodeId>& param_ids,
                              DenseArray batch) {
  if (batch.rank() != 3 || batch.dim(1) != cfg.in_channels)
    throw std::invalid_argument("build_forward: batch must be (n, channels, length)");
  ModelGraph g;
  g.param_ids = param_ids;
  g.input = tape.input("batch", std::move(batch));

  NodeId x = g.input;
  for (std::size_t layer = 0; layer < cfg.conv_channels.size(); ++layer) {
    std::string id = std::to_string(layer);
    x = tape.conv1d(x, g.param_ids.at("conv" + id + "_w"), g.param_ids.at("conv" + id + "_b"),
                    1, cfg.padding);
    x = tape.relu(x);
    x = tape.maxpool1d(x, cfg.pool);
  }
  NodeId feat = tape.global_mean_pool(x);
  NodeId h = tape.relu(tape.affine(feat, g.param_ids.at("proj0_w"), g.param_ids.at("proj0_b")));
  g.embedding = tape.affine(h, g.param_ids.at("proj1_w"), g.param_ids.at("proj1_b"));
  g.logits = tape.affine(g.embedding, g.param_ids.at("cls_w"), g.param_ids.at("cls_b"));
  return g;
}

ModelGraph build_forward(Tape& tape, const ModelConfig& cfg, const ModelParams& params,
                         DenseArray batch, bool trainable) {
  return build_forward_view(tape, cfg, add_parameters(tape, params, trainable),
                            std::move(batch));
}

EvalOut eval_forward(const ModelConfig& cfg, const ModelParams& params,
                     const DenseArray& batch) {
  Tape tape;
  ModelGraph g = build_forward(tape, cfg, params, batch, false);
  return {tape.value(g.embedding), tape.value(g.logits)};
}

}  // namespace ssfl

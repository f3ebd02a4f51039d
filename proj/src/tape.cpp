#include "ssfl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ssfl {

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kAffine: return "affine";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kRelu: return "relu";
    case OpKind::kMaxPool1d: return "maxpool1d";
    case OpKind::kGlobalMeanPool: return "global_mean_pool";
    case OpKind::kSoftmaxXent: return "softmax_xent";
    case OpKind::kL2Normalize: return "l2_normalize";
    case OpKind::kCosineSim: return "cosine_similarity";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kSumAll: return "sum_all";
    case OpKind::kMeanAll: return "mean_all";
    case OpKind::kRowSum: return "row_sum";
    case OpKind::kConcatRows: return "concat_rows";
  }
  return "?";
}

namespace {

[[noreturn]] void shape_error(const char* op, NodeId id, const std::string& detail) {
  throw std::invalid_argument(std::string("shape mismatch in ") + op + " (node " +
                              std::to_string(id) + "): " + detail);
}

}  // namespace

NodeId Tape::push(TapeNode n) {
  for (NodeId p : n.parents) {
    if (p < 0 || static_cast<std::size_t>(p) >= nodes_.size())
      throw std::invalid_argument("tape: parent id out of range");
  }
  nodes_.push_back(std::move(n));
  NodeId id = static_cast<NodeId>(nodes_.size() - 1);
  forward_node(static_cast<std::size_t>(id));
  return id;
}

NodeId Tape::leaf(std::string name, DenseArray value, bool trainable) {
  TapeNode n;
  n.kind = OpKind::kLeaf;
  n.name = std::move(name);
  n.value = std::move(value);
  n.trainable = trainable;
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
  const auto& xv = value(x);
  const auto& wv = value(w);
  const auto& bv = value(b);
  if (xv.rank() != 2 || wv.rank() != 2)
    shape_error("affine", static_cast<NodeId>(nodes_.size()), "expects 2-D x and w");
  if (xv.dim(1) != wv.dim(0))
    shape_error("affine", static_cast<NodeId>(nodes_.size()),
                "x " + xv.shape_str() + " vs w " + wv.shape_str());
  if (bv.size() != wv.dim(1))
    shape_error("affine", static_cast<NodeId>(nodes_.size()),
                "bias " + bv.shape_str() + " vs w " + wv.shape_str());
  TapeNode n;
  n.kind = OpKind::kAffine;
  n.parents = {x, w, b};
  return push(std::move(n));
}

NodeId Tape::conv1d(NodeId x, NodeId w, NodeId b, int stride, int padding) {
  const auto& xv = value(x);
  const auto& wv = value(w);
  const auto& bv = value(b);
  if (xv.rank() != 3 || wv.rank() != 3)
    shape_error("conv1d", static_cast<NodeId>(nodes_.size()), "expects (n,cin,l) and (cout,cin,k)");
  if (xv.dim(1) != wv.dim(1))
    shape_error("conv1d", static_cast<NodeId>(nodes_.size()),
                "channel mismatch: x " + xv.shape_str() + " w " + wv.shape_str());
  if (bv.size() != wv.dim(0))
    shape_error("conv1d", static_cast<NodeId>(nodes_.size()), "bias size");
  if (stride < 1 || padding < 0)
    throw std::invalid_argument("conv1d: bad stride/padding");
  std::size_t l = xv.dim(2), k = wv.dim(2);
  if (l + 2 * static_cast<std::size_t>(padding) < k)
    shape_error("conv1d", static_cast<NodeId>(nodes_.size()), "kernel longer than padded input");
  TapeNode n;
  n.kind = OpKind::kConv1d;
  n.parents = {x, w, b};
  n.stride = stride;
  n.padding = padding;
  return push(std::move(n));
}

NodeId Tape::relu(NodeId x) {
  TapeNode n;
  n.kind = OpKind::kRelu;
  n.parents = {x};
  return push(std::move(n));
}

NodeId Tape::maxpool1d(NodeId x, int window) {
  const auto& xv = value(x);
  if (xv.rank() != 3) shape_error("maxpool1d", static_cast<NodeId>(nodes_.size()), "expects (n,c,l)");
  if (window < 1 || xv.dim(2) < static_cast<std::size_t>(window))
    shape_error("maxpool1d", static_cast<NodeId>(nodes_.size()), "window exceeds length");
  TapeNode n;
  n.kind = OpKind::kMaxPool1d;
  n.parents = {x};
  n.window = window;
  return push(std::move(n));
}

NodeId Tape::global_mean_pool(NodeId x) {
  const auto& xv = value(x);
  if (xv.rank() != 3) shape_error("global_mean_pool", static_cast<NodeId>(nodes_.size()), "expects (n,c,l)");
  TapeNode n;
  n.kind = OpKind::kGlobalMeanPool;
  n.parents = {x};
  return push(std::move(n));
}

NodeId Tape::softmax_xent(NodeId logits, DenseArray targets, DenseArray row_weights,
                          double normalizer) {
  const auto& lv = value(logits);
  if (lv.rank() != 2) shape_error("softmax_xent", static_cast<NodeId>(nodes_.size()), "expects (n,c) logits");
  if (!targets.same_shape(lv))
    shape_error("softmax_xent", static_cast<NodeId>(nodes_.size()),
                "targets " + targets.shape_str() + " vs logits " + lv.shape_str());
  if (row_weights.size() != lv.dim(0))
    shape_error("softmax_xent", static_cast<NodeId>(nodes_.size()), "row_weights length");
  if (normalizer <= 0.0) throw std::invalid_argument("softmax_xent: normalizer must be > 0");
  TapeNode n;
  n.kind = OpKind::kSoftmaxXent;
  n.parents = {logits};
  n.aux = std::move(targets);
  n.aux2 = std::move(row_weights);
  n.scalar = normalizer;
  return push(std::move(n));
}

NodeId Tape::l2_normalize(NodeId x) {
  const auto& xv = value(x);
  if (xv.rank() != 2) shape_error("l2_normalize", static_cast<NodeId>(nodes_.size()), "expects (n,d)");
  TapeNode n;
  n.kind = OpKind::kL2Normalize;
  n.parents = {x};
  return push(std::move(n));
}

NodeId Tape::cosine_similarity(NodeId a, NodeId b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(1))
    shape_error("cosine_similarity", static_cast<NodeId>(nodes_.size()),
                av.shape_str() + " vs " + bv.shape_str());
  TapeNode n;
  n.kind = OpKind::kCosineSim;
  n.parents = {a, b};
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  if (!value(a).same_shape(value(b)))
    shape_error("add", static_cast<NodeId>(nodes_.size()),
                value(a).shape_str() + " vs " + value(b).shape_str());
  TapeNode n;
  n.kind = OpKind::kAdd;
  n.parents = {a, b};
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  if (!value(a).same_shape(value(b)))
    shape_error("mul", static_cast<NodeId>(nodes_.size()),
                value(a).shape_str() + " vs " + value(b).shape_str());
  TapeNode n;
  n.kind = OpKind::kMul;
  n.parents = {a, b};
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double s) {
  TapeNode n;
  n.kind = OpKind::kScale;
  n.parents = {a};
  n.scalar = s;
  return push(std::move(n));
}

NodeId Tape::exp_of(NodeId a) {
  TapeNode n;
  n.kind = OpKind::kExp;
  n.parents = {a};
  return push(std::move(n));
}

NodeId Tape::log_of(NodeId a) {
  TapeNode n;
  n.kind = OpKind::kLog;
  n.parents = {a};
  return push(std::move(n));
}

NodeId Tape::sum_all(NodeId a) {
  TapeNode n;
  n.kind = OpKind::kSumAll;
  n.parents = {a};
  return push(std::move(n));
}

NodeId Tape::mean_all(NodeId a) {
  TapeNode n;
  n.kind = OpKind::kMeanAll;
  n.parents = {a};
  return push(std::move(n));
}

NodeId Tape::row_sum(NodeId a) {
  if (value(a).rank() != 2) shape_error("row_sum", static_cast<NodeId>(nodes_.size()), "expects (n,m)");
  TapeNode n;
  n.kind = OpKind::kRowSum;
  n.parents = {a};
  return push(std::move(n));
}

NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no parts");
  std::size_t d = value(parts[0]).dim(1);
  for (NodeId p : parts) {
    if (value(p).rank() != 2 || value(p).dim(1) != d)
      shape_error("concat_rows", static_cast<NodeId>(nodes_.size()), "column mismatch");
  }
  TapeNode n;
  n.kind = OpKind::kConcatRows;
  n.parents = parts;
  return push(std::move(n));
}

void Tape::set_leaf_value(NodeId id, DenseArray value) {
  TapeNode& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.kind != OpKind::kLeaf) throw std::invalid_argument("set_leaf_value: not a leaf");
  if (!n.value.shape.empty() && n.value.shape != value.shape)
    throw std::invalid_argument("set_leaf_value: shape change not allowed");
  n.value = std::move(value);
}

void Tape::nudge_leaf(NodeId id, std::size_t flat_index, double delta) {
  TapeNode& n = nodes_.at(static_cast<std::size_t>(id));
  if (n.kind != OpKind::kLeaf) throw std::invalid_argument("nudge_leaf: not a leaf");
  n.value.data.at(flat_index) += delta;
}

// --- forward -------------------------------------------------------------

void Tape::forward_node(std::size_t i) {
  TapeNode& n = nodes_[i];
  auto& P = nodes_;
  switch (n.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kAffine: {
      const DenseArray& x = P[n.parents[0]].value;
      const DenseArray& w = P[n.parents[1]].value;
      const DenseArray& b = P[n.parents[2]].value;
      std::size_t nr = x.dim(0), k = x.dim(1), m = w.dim(1);
      DenseArray out = DenseArray::zeros({nr, m});
      for (std::size_t r = 0; r < nr; ++r) {
        double* orow = &out.data[r * m];
        for (std::size_t j = 0; j < m; ++j) orow[j] = b.data[j];
        const double* xrow = &x.data[r * k];
        for (std::size_t t = 0; t < k; ++t) {
          double xv = xrow[t];
          const double* wrow = &w.data[t * m];
          for (std::size_t j = 0; j < m; ++j) orow[j] += xv * wrow[j];
        }
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kConv1d: {
      const DenseArray& x = P[n.parents[0]].value;
      const DenseArray& w = P[n.parents[1]].value;
      const DenseArray& b = P[n.parents[2]].value;
      std::size_t nb = x.dim(0), cin = x.dim(1), l = x.dim(2);
      std::size_t cout = w.dim(0), k = w.dim(2);
      std::size_t lo = (l + 2 * static_cast<std::size_t>(n.padding) - k) /
                           static_cast<std::size_t>(n.stride) + 1;
      DenseArray out = DenseArray::zeros({nb, cout, lo});
      long pad = n.padding, stride = n.stride;
      for (std::size_t s = 0; s < nb; ++s) {
        for (std::size_t co = 0; co < cout; ++co) {
          double* orow = &out.data[(s * cout + co) * lo];
          for (std::size_t p = 0; p < lo; ++p) orow[p] = b.data[co];
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xrow = &x.data[(s * cin + ci) * l];
            const double* wrow = &w.data[(co * cin + ci) * k];
            for (std::size_t p = 0; p < lo; ++p) {
              long start = static_cast<long>(p) * stride - pad;
              double acc = 0.0;
              long t0 = std::max(0L, -start);
              long t1 = std::min(static_cast<long>(k), static_cast<long>(l) - start);
              for (long t = t0; t < t1; ++t) acc += xrow[start + t] * wrow[t];
              orow[p] += acc;
            }
          }
        }
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kRelu: {
      const DenseArray& x = P[n.parents[0]].value;
      DenseArray out(x.shape, x.data);
      for (double& v : out.data) v = v > 0.0 ? v : 0.0;
      n.value = std::move(out);
      break;
    }
    case OpKind::kMaxPool1d: {
      const DenseArray& x = P[n.parents[0]].value;
      std::size_t nb = x.dim(0), c = x.dim(1), l = x.dim(2);
      std::size_t w = static_cast<std::size_t>(n.window);
      std::size_t lo = l / w;
      DenseArray out = DenseArray::zeros({nb, c, lo});
      n.arg_index.assign(nb * c * lo, 0);
      for (std::size_t s = 0; s < nb; ++s)
        for (std::size_t ch = 0; ch < c; ++ch) {
          std::size_t row_base = (s * c + ch) * l;
          const double* xrow = &x.data[row_base];
          double* orow = &out.data[(s * c + ch) * lo];
          std::size_t* arow = &n.arg_index[(s * c + ch) * lo];
          for (std::size_t p = 0; p < lo; ++p) {
            std::size_t best = p * w;
            double bv = xrow[best];
            for (std::size_t t = 1; t < w; ++t) {
              if (xrow[p * w + t] > bv) {
                bv = xrow[p * w + t];
                best = p * w + t;
              }
            }
            orow[p] = bv;
            arow[p] = row_base + best;  // flat index into the input
          }
        }
      n.value = std::move(out);
      break;
    }
    case OpKind::kGlobalMeanPool: {
      const DenseArray& x = P[n.parents[0]].value;
      std::size_t nb = x.dim(0), c = x.dim(1), l = x.dim(2);
      DenseArray out = DenseArray::zeros({nb, c});
      for (std::size_t s = 0; s < nb; ++s)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const double* xrow = &x.data[(s * c + ch) * l];
          double acc = 0.0;
          for (std::size_t t = 0; t < l; ++t) acc += xrow[t];
          out.data[s * c + ch] = acc / static_cast<double>(l);
        }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSoftmaxXent: {
      // log-sum-exp stabilized by row-max subtraction; probabilities cached
      // in aux rows are reused by the backward pass.
      const DenseArray& logits = P[n.parents[0]].value;
      std::size_t nr = logits.dim(0), c = logits.dim(1);
      const DenseArray& targets = n.aux;
      const DenseArray& wts = n.aux2;
      if (n.aux.size() != nr * c) throw std::logic_error("softmax_xent: bad cache");
      DenseArray probs = DenseArray::zeros({nr, c});
      double loss = 0.0;
      for (std::size_t r = 0; r < nr; ++r) {
        const double* lrow = &logits.data[r * c];
        double mx = lrow[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, lrow[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(lrow[j] - mx);
        double logz = std::log(z) + mx;
        double ce = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
          probs.data[r * c + j] = std::exp(lrow[j] - logz);
          ce += targets.data[r * c + j] * (logz - lrow[j]);
        }
        loss += wts.data[r] * ce;
      }
      n.value = DenseArray::scalar(loss / n.scalar);
      n.probs = std::move(probs);
      break;
    }
    case OpKind::kL2Normalize: {
      const DenseArray& x = P[n.parents[0]].value;
      std::size_t nr = x.dim(0), d = x.dim(1);
      DenseArray out = DenseArray::zeros({nr, d});
      DenseArray norms = DenseArray::zeros({nr});
      for (std::size_t r = 0; r < nr; ++r) {
        const double* xrow = &x.data[r * d];
        double nsq = 0.0;
        for (std::size_t j = 0; j < d; ++j) nsq += xrow[j] * xrow[j];
        double nn = std::sqrt(nsq);
        if (nn < 1e-12)
          throw std::domain_error("l2_normalize: zero-norm row " + std::to_string(r));
        norms.data[r] = nn;
        for (std::size_t j = 0; j < d; ++j) out.data[r * d + j] = xrow[j] / nn;
      }
      n.aux = std::move(norms);
      n.value = std::move(out);
      break;
    }
    case OpKind::kCosineSim: {
      const DenseArray& a = P[n.parents[0]].value;
      const DenseArray& b = P[n.parents[1]].value;
      std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
      DenseArray out = DenseArray::zeros({na, nb});
      DenseArray norms = DenseArray::zeros({na + nb});
      for (std::size_t r = 0; r < na; ++r) {
        double nsq = 0.0;
        for (std::size_t j = 0; j < d; ++j) nsq += a.data[r * d + j] * a.data[r * d + j];
        norms.data[r] = std::sqrt(nsq);
      }
      for (std::size_t r = 0; r < nb; ++r) {
        double nsq = 0.0;
        for (std::size_t j = 0; j < d; ++j) nsq += b.data[r * d + j] * b.data[r * d + j];
        norms.data[na + r] = std::sqrt(nsq);
      }
      for (std::size_t r = 0; r < na + nb; ++r)
        if (norms.data[r] < 1e-12)
          throw std::domain_error("cosine_similarity: zero-norm vector");
      for (std::size_t r = 0; r < na; ++r)
        for (std::size_t s = 0; s < nb; ++s) {
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) dot += a.data[r * d + j] * b.data[s * d + j];
          out.data[r * nb + s] = dot / (norms.data[r] * norms.data[na + s]);
        }
      n.aux = std::move(norms);
      n.value = std::move(out);
      break;
    }
    case OpKind::kAdd: {
      const DenseArray& a = P[n.parents[0]].value;
      const DenseArray& b = P[n.parents[1]].value;
      DenseArray out(a.shape, a.data);
      for (std::size_t j = 0; j < out.size(); ++j) out.data[j] += b.data[j];
      n.value = std::move(out);
      break;
    }
    case OpKind::kMul: {
      const DenseArray& a = P[n.parents[0]].value;
      const DenseArray& b = P[n.parents[1]].value;
      DenseArray out(a.shape, a.data);
      for (std::size_t j = 0; j < out.size(); ++j) out.data[j] *= b.data[j];
      n.value = std::move(out);
      break;
    }
    case OpKind::kScale: {
      const DenseArray& a = P[n.parents[0]].value;
      DenseArray out(a.shape, a.data);
      for (double& v : out.data) v *= n.scalar;
      n.value = std::move(out);
      break;
    }
    case OpKind::kExp: {
      const DenseArray& a = P[n.parents[0]].value;
      DenseArray out(a.shape, a.data);
      for (double& v : out.data) v = std::exp(v);
      n.value = std::move(out);
      break;
    }
    case OpKind::kLog: {
      const DenseArray& a = P[n.parents[0]].value;
      DenseArray out(a.shape, a.data);
      for (double& v : out.data) {
        if (v <= 0.0) throw std::domain_error("log of non-positive value");
        v = std::log(v);
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSumAll: {
      const DenseArray& a = P[n.parents[0]].value;
      double acc = 0.0;
      for (double v : a.data) acc += v;
      n.value = DenseArray::scalar(acc);
      break;
    }
    case OpKind::kMeanAll: {
      const DenseArray& a = P[n.parents[0]].value;
      double acc = 0.0;
      for (double v : a.data) acc += v;
      n.value = DenseArray::scalar(acc / static_cast<double>(a.size()));
      break;
    }
    case OpKind::kRowSum: {
      const DenseArray& a = P[n.parents[0]].value;
      std::size_t nr = a.dim(0), m = a.dim(1);
      DenseArray out = DenseArray::zeros({nr});
      for (std::size_t r = 0; r < nr; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += a.data[r * m + j];
        out.data[r] = acc;
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kConcatRows: {
      std::size_t d = P[n.parents[0]].value.dim(1);
      std::size_t rows = 0;
      for (NodeId p : n.parents) rows += P[p].value.dim(0);
      DenseArray out = DenseArray::zeros({rows, d});
      std::size_t off = 0;
      for (NodeId p : n.parents) {
        const DenseArray& a = P[p].value;
        std::copy(a.data.begin(), a.data.end(), out.data.begin() + static_cast<long>(off));
        off += a.size();
      }
      n.value = std::move(out);
      break;
    }
  }
}

const DenseArray& Tape::evaluate(NodeId terminal) {
  if (terminal < 0 || static_cast<std::size_t>(terminal) >= nodes_.size())
    throw std::invalid_argument("evaluate: bad terminal id");
  for (std::size_t i = 0; i <= static_cast<std::size_t>(terminal); ++i) forward_node(i);
  return nodes_[static_cast<std::size_t>(terminal)].value;
}

// --- backward ------------------------------------------------------------

void Tape::backpropagate(NodeId terminal) {
  if (terminal < 0 || static_cast<std::size_t>(terminal) >= nodes_.size())
    throw std::invalid_argument("backpropagate: bad terminal id");
  if (nodes_[static_cast<std::size_t>(terminal)].value.size() != 1)
    throw std::invalid_argument("backpropagate: terminal must be scalar");
  for (auto& n : nodes_) {
    n.adjoint = DenseArray::zeros(n.value.shape);
  }
  nodes_[static_cast<std::size_t>(terminal)].adjoint.data[0] = 1.0;
  for (std::size_t i = static_cast<std::size_t>(terminal) + 1; i-- > 0;) backward_node(i);
}

void Tape::backward_node(std::size_t i) {
  TapeNode& n = nodes_[i];
  auto& P = nodes_;
  bool any = false;
  for (double v : n.adjoint.data)
    if (v != 0.0) { any = true; break; }
  if (!any || n.kind == OpKind::kLeaf) return;

  switch (n.kind) {
    case OpKind::kLeaf:
      break;
    case OpKind::kAffine: {
      const DenseArray& x = P[n.parents[0]].value;
      const DenseArray& w = P[n.parents[1]].value;
      DenseArray& gx = P[n.parents[0]].adjoint;
      DenseArray& gw = P[n.parents[1]].adjoint;
      DenseArray& gb = P[n.parents[2]].adjoint;
      std::size_t nr = x.dim(0), k = x.dim(1), m = w.dim(1);
      for (std::size_t r = 0; r < nr; ++r) {
        const double* grow = &n.adjoint.data[r * m];
        const double* xrow = &x.data[r * k];
        for (std::size_t j = 0; j < m; ++j) gb.data[j] += grow[j];
        for (std::size_t t = 0; t < k; ++t) {
          const double* wrow = &w.data[t * m];
          double* gwrow = &gw.data[t * m];
          double acc = 0.0;
          double xv = xrow[t];
          for (std::size_t j = 0; j < m; ++j) {
            acc += grow[j] * wrow[j];
            gwrow[j] += grow[j] * xv;
          }
          gx.data[r * k + t] += acc;
        }
      }
      break;
    }
    case OpKind::kConv1d: {
      const DenseArray& x = P[n.parents[0]].value;
      const DenseArray& w = P[n.parents[1]].value;
      DenseArray& gx = P[n.parents[0]].adjoint;
      DenseArray& gw = P[n.parents[1]].adjoint;
      DenseArray& gb = P[n.parents[2]].adjoint;
      std::size_t nb = x.dim(0), cin = x.dim(1), l = x.dim(2);
      std::size_t cout = w.dim(0), k = w.dim(2);
      std::size_t lo = n.value.dim(2);
      long pad = n.padding, stride = n.stride;
      for (std::size_t s = 0; s < nb; ++s) {
        for (std::size_t co = 0; co < cout; ++co) {
          const double* grow = &n.adjoint.data[(s * cout + co) * lo];
          for (std::size_t p = 0; p < lo; ++p) gb.data[co] += grow[p];
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const double* xrow = &x.data[(s * cin + ci) * l];
            double* gxrow = &gx.data[(s * cin + ci) * l];
            const double* wrow = &w.data[(co * cin + ci) * k];
            double* gwrow = &gw.data[(co * cin + ci) * k];
            for (std::size_t p = 0; p < lo; ++p) {
              double g = grow[p];
              if (g == 0.0) continue;
              long start = static_cast<long>(p) * stride - pad;
              long t0 = std::max(0L, -start);
              long t1 = std::min(static_cast<long>(k), static_cast<long>(l) - start);
              for (long t = t0; t < t1; ++t) {
                gxrow[start + t] += g * wrow[t];
                gwrow[t] += g * xrow[start + t];
              }
            }
          }
        }
      }
      break;
    }
    case OpKind::kRelu: {
      const DenseArray& x = P[n.parents[0]].value;
      DenseArray& gx = P[n.parents[0]].adjoint;
      // subgradient at 0 is 0
      for (std::size_t j = 0; j < x.size(); ++j)
        if (x.data[j] > 0.0) gx.data[j] += n.adjoint.data[j];
      break;
    }
    case OpKind::kMaxPool1d: {
      DenseArray& gx = P[n.parents[0]].adjoint;
      for (std::size_t j = 0; j < n.value.size(); ++j)
        gx.data[n.arg_index[j]] += n.adjoint.data[j];
      break;
    }
    case OpKind::kGlobalMeanPool: {
      const DenseArray& x = P[n.parents[0]].value;
      DenseArray& gx = P[n.parents[0]].adjoint;
      std::size_t nb = x.dim(0), c = x.dim(1), l = x.dim(2);
      double inv = 1.0 / static_cast<double>(l);
      for (std::size_t s = 0; s < nb; ++s)
        for (std::size_t ch = 0; ch < c; ++ch) {
          double g = n.adjoint.data[s * c + ch] * inv;
          double* gxrow = &gx.data[(s * c + ch) * l];
          for (std::size_t t = 0; t < l; ++t) gxrow[t] += g;
        }
      break;
    }
    case OpKind::kSoftmaxXent: {
      const DenseArray& logits = P[n.parents[0]].value;
      DenseArray& gl = P[n.parents[0]].adjoint;
      std::size_t nr = logits.dim(0), c = logits.dim(1);
      double g = n.adjoint.data[0] / n.scalar;
      const DenseArray& probs = n.probs;
      for (std::size_t r = 0; r < nr; ++r) {
        double wg = g * n.aux2.data[r];
        for (std::size_t j = 0; j < c; ++j)
          gl.data[r * c + j] += wg * (probs.data[r * c + j] - n.aux.data[r * c + j]);
      }
      break;
    }
    case OpKind::kL2Normalize: {
      const DenseArray& x = P[n.parents[0]].value;
      DenseArray& gx = P[n.parents[0]].adjoint;
      std::size_t nr = x.dim(0), d = x.dim(1);
      for (std::size_t r = 0; r < nr; ++r) {
        double nn = n.aux.data[r];
        const double* yrow = &n.value.data[r * d];
        const double* grow = &n.adjoint.data[r * d];
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += grow[j] * yrow[j];
        for (std::size_t j = 0; j < d; ++j)
          gx.data[r * d + j] += (grow[j] - dot * yrow[j]) / nn;
      }
      break;
    }
    case OpKind::kCosineSim: {
      const DenseArray& a = P[n.parents[0]].value;
      const DenseArray& b = P[n.parents[1]].value;
      DenseArray& ga = P[n.parents[0]].adjoint;
      DenseArray& gb = P[n.parents[1]].adjoint;
      std::size_t na = a.dim(0), nb = b.dim(0), d = a.dim(1);
      for (std::size_t r = 0; r < na; ++r) {
        double an = n.aux.data[r];
        for (std::size_t s = 0; s < nb; ++s) {
          double g = n.adjoint.data[r * nb + s];
          if (g == 0.0) continue;
          double bn = n.aux.data[na + s];
          double c = n.value.data[r * nb + s];
          for (std::size_t j = 0; j < d; ++j) {
            double av = a.data[r * d + j], bv = b.data[s * d + j];
            ga.data[r * d + j] += g * (bv / (an * bn) - c * av / (an * an));
            gb.data[s * d + j] += g * (av / (an * bn) - c * bv / (bn * bn));
          }
        }
      }
      break;
    }
    case OpKind::kAdd: {
      for (int p = 0; p < 2; ++p) {
        DenseArray& gp = P[n.parents[p]].adjoint;
        for (std::size_t j = 0; j < gp.size(); ++j) gp.data[j] += n.adjoint.data[j];
      }
      break;
    }
    case OpKind::kMul: {
      const DenseArray& a = P[n.parents[0]].value;
      const DenseArray& b = P[n.parents[1]].value;
      DenseArray& ga = P[n.parents[0]].adjoint;
      DenseArray& gb = P[n.parents[1]].adjoint;
      for (std::size_t j = 0; j < a.size(); ++j) {
        ga.data[j] += n.adjoint.data[j] * b.data[j];
        gb.data[j] += n.adjoint.data[j] * a.data[j];
      }
      break;
    }
    case OpKind::kScale: {
      DenseArray& ga = P[n.parents[0]].adjoint;
      for (std::size_t j = 0; j < ga.size(); ++j) ga.data[j] += n.adjoint.data[j] * n.scalar;
      break;
    }
    case OpKind::kExp: {
      DenseArray& ga = P[n.parents[0]].adjoint;
      for (std::size_t j = 0; j < ga.size(); ++j)
        ga.data[j] += n.adjoint.data[j] * n.value.data[j];
      break;
    }
    case OpKind::kLog: {
      const DenseArray& a = P[n.parents[0]].value;
      DenseArray& ga = P[n.parents[0]].adjoint;
      for (std::size_t j = 0; j < ga.size(); ++j)
        ga.data[j] += n.adjoint.data[j] / a.data[j];
      break;
    }
    case OpKind::kSumAll: {
      DenseArray& ga = P[n.parents[0]].adjoint;
      double g = n.adjoint.data[0];
      for (double& v : ga.data) v += g;
      break;
    }
    case OpKind::kMeanAll: {
      DenseArray& ga = P[n.parents[0]].adjoint;
      double g = n.adjoint.data[0] / static_cast<double>(ga.size());
      for (double& v : ga.data) v += g;
      break;
    }
    case OpKind::kRowSum: {
      const DenseArray& a = P[n.parents[0]].value;
      DenseArray& ga = P[n.parents[0]].adjoint;
      std::size_t nr = a.dim(0), m = a.dim(1);
      for (std::size_t r = 0; r < nr; ++r) {
        double g = n.adjoint.data[r];
        for (std::size_t j = 0; j < m; ++j) ga.data[r * m + j] += g;
      }
      break;
    }
    case OpKind::kConcatRows: {
      std::size_t off = 0;
      for (NodeId p : n.parents) {
        DenseArray& gp = P[p].adjoint;
        for (std::size_t j = 0; j < gp.size(); ++j) gp.data[j] += n.adjoint.data[off + j];
        off += gp.size();
      }
      break;
    }
  }
}

namespace {
std::uint64_t mix_step(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return h;
}
}  // namespace

std::uint64_t Tape::kink_signature() const {
  std::uint64_t h = 0x9e3779b97f4a7c15ull;
  for (const auto& n : nodes_) {
    if (n.kind == OpKind::kRelu) {
      const DenseArray& x = nodes_[n.parents[0]].value;
      for (double v : x.data) h = mix_step(h, v > 0.0 ? 1u : 0u);
    } else if (n.kind == OpKind::kMaxPool1d) {
      for (std::size_t idx : n.arg_index) h = mix_step(h, idx + 2);
    }
  }
  return h;
}

std::vector<NodeId> Tape::trainable_ids() const {
  std::vector<NodeId> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].trainable) out.push_back(static_cast<NodeId>(i));
  return out;
}

// --- gradient check ------------------------------------------------------

GradCheckReport gradient_check(Tape& tape, NodeId terminal, double step,
                               double tolerance) {
  if (step <= 0.0) throw std::invalid_argument("gradient_check: step must be > 0");
  GradCheckReport report;
  const DenseArray& base = tape.evaluate(terminal);
  if (base.size() != 1 || !std::isfinite(base.data[0]))
    throw std::domain_error("gradient_check: loss non-finite or non-scalar at node " +
                            std::to_string(terminal));
  tape.backpropagate(terminal);

  std::vector<NodeId> params = tape.trainable_ids();
  std::vector<DenseArray> analytic;
  analytic.reserve(params.size());
  for (NodeId p : params) analytic.push_back(tape.adjoint(p));

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    NodeId p = params[pi];
    GradCheckEntry entry;
    entry.name = tape.node(p).name;
    std::size_t count = tape.value(p).size();
    for (std::size_t j = 0; j < count; ++j) {
      tape.nudge_leaf(p, j, step);
      double up = tape.evaluate(terminal).data[0];
      std::uint64_t sig_up = tape.kink_signature();
      tape.nudge_leaf(p, j, -2.0 * step);
      double dn = tape.evaluate(terminal).data[0];
      std::uint64_t sig_dn = tape.kink_signature();
      tape.nudge_leaf(p, j, step);
      if (sig_up != sig_dn) {
        ++entry.skipped_kinks;
        continue;
      }
      double fd = (up - dn) / (2.0 * step);
      double an = analytic[pi].data[j];
      double rel = std::fabs(fd - an) / std::max({1.0, std::fabs(fd), std::fabs(an)});
      if (rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = j;
      }
      ++entry.checked;
    }
    entry.pass = entry.max_rel_error <= tolerance;
    report.all_pass = report.all_pass && entry.pass;
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  // restore baseline values/adjoints
  tape.evaluate(terminal);
  tape.backpropagate(terminal);
  return report;
}

}  // namespace ssfl

#include "ssfl/optimizer.hpp"

#include <cmath>
#include <stdexcept>

namespace ssfl {

void AdamOptimizer::step(ModelParams& params, const std::map<std::string, DenseArray>& grads) {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& e : params.entries) {
    auto it = grads.find(e.name);
    if (it == grads.end()) continue;
    const DenseArray& g = it->second;
    if (!g.same_shape(e.array))
      throw std::invalid_argument("adam: gradient shape mismatch for " + e.name);
    auto& m = m_.try_emplace(e.name, DenseArray::zeros(e.array.shape)).first->second;
    auto& v = v_.try_emplace(e.name, DenseArray::zeros(e.array.shape)).first->second;
    for (std::size_t j = 0; j < g.size(); ++j) {
      m.data[j] = beta1_ * m.data[j] + (1.0 - beta1_) * g.data[j];
      v.data[j] = beta2_ * v.data[j] + (1.0 - beta2_) * g.data[j] * g.data[j];
      double mhat = m.data[j] / bc1;
      double vhat = v.data[j] / bc2;
      e.array.data[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace ssfl

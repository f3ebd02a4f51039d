#pragma once

#include <map>
#include <string>

#include "ssfl/dense_array.hpp"
#include "ssfl/model.hpp"

namespace ssfl {

// Adam with per-parameter moment buffers; state persists across rounds.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelParams& params, const std::map<std::string, DenseArray>& grads);
  long step_count() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::map<std::string, DenseArray> m_, v_;
};

}  // namespace ssfl

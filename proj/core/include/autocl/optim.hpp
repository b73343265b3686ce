#pragma once

#include <cstddef>
#include <vector>

#include "autocl/tensor.hpp"

namespace autocl {

// Plain gradient descent: p -= lr * g.
struct Sgd {
  double lr = 1e-3;

  void step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads) const;
};

// Adam with bias correction. Moment buffers are sized on the first step.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads);
  std::size_t steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

}  // namespace autocl

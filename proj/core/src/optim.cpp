#include "autocl/optim.hpp"

#include <cmath>

#include "autocl/error.hpp"

namespace autocl {
namespace {

void check_pairs(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) throw DimensionError("optimizer: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->shape() != grads[i]->shape())
      throw DimensionError("optimizer: gradient shape " + shape_string(grads[i]->shape()) +
                           " does not match parameter " + shape_string(params[i]->shape()));
}

}  // namespace

void Sgd::step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads) const {
  check_pairs(params, grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * g[j];
  }
}

void Adam::step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads) {
  check_pairs(params, grads);
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  } else if (m_.size() != params.size()) {
    throw DimensionError("Adam: parameter list changed between steps");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    const Tensor& g = *grads[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      p[j] -= lr_ * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps_);
    }
  }
}

}  // namespace autocl

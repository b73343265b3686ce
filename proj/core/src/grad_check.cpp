#include "autocl/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "autocl/error.hpp"

namespace autocl {
namespace {

double evaluate(const ScalarFn& f, const Tensor& point) {
  Tape tape;
  Var x = tape.leaf(point, true);
  Var y = f(tape, x);
  if (y.value().size() != 1) throw DimensionError("grad_check: function must return a scalar");
  const double v = y.value()[0];
  if (!std::isfinite(v)) throw NumericError("grad_check: function returned a non-finite value");
  return v;
}

}  // namespace

Tensor tape_gradient(const ScalarFn& f, const Tensor& point) {
  Tape tape;
  Var x = tape.leaf(point, true);
  Var y = f(tape, x);
  return tape.backward(y)[x];
}

Tensor numeric_gradient(const ScalarFn& f, const Tensor& point, double step) {
  if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");
  Tensor grad(point.shape());
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = evaluate(f, probe);
    probe[i] = point[i] - step;
    const double down = evaluate(f, probe);
    probe[i] = point[i];
    grad[i] = (up - down) / (2.0 * step);
  }
  return grad;
}

double grad_check(const ScalarFn& f, const Tensor& point, double step) {
  const Tensor numeric = numeric_gradient(f, point, step);
  const Tensor analytic = tape_gradient(f, point);
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double a = analytic[i], n = numeric[i];
    const double err = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace autocl

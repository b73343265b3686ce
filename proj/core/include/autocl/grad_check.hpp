#pragma once

#include <functional>

#include "autocl/tape.hpp"

namespace autocl {

// Builds a scalar from a single trainable leaf on the given tape.
using ScalarFn = std::function<Var(Tape&, Var)>;

// Compares the tape gradient of f at `point` with central differences
// (f(x+h e_i) - f(x-h e_i)) / 2h for every coordinate. Returns
// max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8). Throws NumericError when f is
// not finite at a probe.
double grad_check(const ScalarFn& f, const Tensor& point, double step = 1e-6);

// Analytic gradient of f at `point`.
Tensor tape_gradient(const ScalarFn& f, const Tensor& point);

// Central-difference gradient of f at `point`.
Tensor numeric_gradient(const ScalarFn& f, const Tensor& point, double step = 1e-6);

}  // namespace autocl

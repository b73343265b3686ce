#pragma once

#include <cstddef>
#include <functional>
#include <deque>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "autocl/tensor.hpp"

namespace autocl {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients of a scalar loss with respect to every trainable leaf of a tape.
class Gradients {
 public:
  const Tensor& operator[](Var leaf) const { return at(leaf.id()); }
  const Tensor& at(std::size_t id) const;
  bool contains(Var leaf) const { return grads_.count(leaf.id()) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::map<std::size_t, Tensor> grads_;
};

// Append-only record of tensor operations for reverse-mode differentiation.
// A tape is owned by a single thread; nodes are stored in topological order.
class Tape {
 public:
  // Receives dL/d(output) and accumulators for dL/d(input); an accumulator is
  // nullptr when that input does not require a gradient.
  using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_in)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool trainable = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an operation node. Throws NumericError if `value` has a
  // non-finite entry.
  Var record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::string_view op_name(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  Gradients backward(Var loss) const;

 private:
  struct Node {
    std::string_view op;
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool trainable = false;
  };
  std::deque<Node> nodes_;  // stable references across appends
};

inline const Tensor& Var::value() const { return tape_->value(id_); }

// Reverse accumulation from a scalar loss. Unused trainable leaves receive
// zero tensors.
inline Gradients backward(Var loss) { return loss.tape()->backward(loss); }

}  // namespace autocl

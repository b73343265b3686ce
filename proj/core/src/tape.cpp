#include "autocl/tape.hpp"

#include <string>

#include "autocl/error.hpp"

namespace autocl {

const Tensor& Gradients::at(std::size_t id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw DimensionError("no gradient recorded for node " + std::to_string(id));
  return it->second;
}

Var Tape::leaf(Tensor value, bool trainable) {
  if (!value.all_finite()) throw NumericError("non-finite value in leaf tensor");
  Node node;
  node.op = trainable ? "param" : "const";
  node.value = std::move(value);
  node.requires_grad = trainable;
  node.trainable = trainable;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  if (!value.all_finite()) throw NumericError("non-finite output from " + std::string(op));
  Node node;
  node.op = op;
  node.value = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw DimensionError("tape input refers to a later node");
    node.requires_grad = node.requires_grad || nodes_[in].requires_grad;
  }
  node.inputs = std::move(inputs);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape() != this) throw DimensionError("loss does not belong to this tape");
  if (value(loss.id()).size() != 1) {
    throw DimensionError("backward needs a scalar loss, got shape " + shape_string(value(loss.id()).shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id()] = Tensor(value(loss.id()).shape(), 1.0);

  std::vector<Tensor*> in_ptrs;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (grads[i].empty() || !node.backward) continue;
    in_ptrs.clear();
    for (std::size_t in : node.inputs) {
      if (!nodes_[in].requires_grad) {
        in_ptrs.push_back(nullptr);
        continue;
      }
      if (grads[in].empty()) grads[in] = Tensor(nodes_[in].value.shape(), 0.0);
      in_ptrs.push_back(&grads[in]);
    }
    node.backward(grads[i], in_ptrs);
    if (!node.trainable) grads[i] = Tensor();
  }

  Gradients out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].trainable) continue;
    if (grads[i].empty()) grads[i] = Tensor(nodes_[i].value.shape(), 0.0);
    out.grads_.emplace(i, std::move(grads[i]));
  }
  return out;
}

}  // namespace autocl

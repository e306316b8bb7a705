#include "tgcmc/diff/tape.hpp"

#include <set>

#include "tgcmc/error.hpp"

namespace tgcmc::diff {

Var Tape::parameter(const std::string& name, Tensor value) {
  for (const auto& node : nodes_) {
    if (node.trainable && node.name == name) {
      throw Error("parameter '" + name + "' registered twice on one tape");
    }
  }
  if (!value.all_finite()) throw NumericError("parameter '" + name + "' holds non-finite values");
  Node node;
  node.value = std::move(value);
  node.name = name;
  node.requires_grad = true;
  node.trainable = true;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op_name, Tensor value, const std::vector<Var>& inputs,
                 Backprop backprop, Tensor aux) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name);
  }
  Node node;
  node.value = std::move(value);
  node.aux = std::move(aux);
  node.name = op_name;
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw Error(std::string(op_name) + ": input from another tape");
    node.requires_grad = node.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (node.requires_grad) {
    node.inputs = inputs;
    node.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad;
}

Gradients Tape::backward(Var loss) {
  if (loss.tape_ != this) throw Error("backward: loss belongs to another tape");
  if (backward_done_) throw Error("backward called twice on one tape");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " +
                     shape_string(nodes_[loss.id()].value.shape()));
  }
  backward_done_ = true;
  grad(loss.id())[0] = 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.has_grad || node.trainable) continue;
    if (node.backprop) node.backprop(*this, id);
    // Intermediate gradients are dead once propagated.
    node.grad = Tensor();
    node.has_grad = false;
  }

  Gradients out;
  for (auto& node : nodes_) {
    if (!node.trainable) continue;
    out.emplace(node.name, node.has_grad ? std::move(node.grad) : Tensor(node.value.shape(), 0.0));
  }
  return out;
}

}  // namespace tgcmc::diff

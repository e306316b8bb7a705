#ifndef TGCMC_DIFF_TAPE_HPP_
#define TGCMC_DIFF_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "tgcmc/diff/tensor.hpp"

namespace tgcmc::diff {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; only valid while the
// tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using Gradients = std::map<std::string, Tensor>;

// Records operations in execution order and replays them in reverse.
//
// A tape is single-use: build the forward pass, call backward() once.
class Tape {
 public:
  // Accumulates into the gradients of the node's inputs, reading the node's
  // own gradient through Tape::grad().
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable leaf. Names must be unique on a tape.
  Var parameter(const std::string& name, Tensor value);
  // Non-trainable leaf; never receives a gradient.
  Var constant(Tensor value);

  // Records an op result. `inputs` decide whether the node needs a gradient;
  // `op_name` appears in non-finite diagnostics.
  Var record(const char* op_name, Tensor value, const std::vector<Var>& inputs, Backprop backprop,
             Tensor aux = {});

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& aux(Var v) const { return nodes_[v.id()].aux; }
  const Tensor& aux(std::size_t id) const { return nodes_[id].aux; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  const std::vector<Var>& inputs(std::size_t id) const { return nodes_[id].inputs; }

  // Gradient buffer of a node, allocated (zero) on first access.
  Tensor& grad(std::size_t id);
  Tensor& grad(Var v) { return grad(v.id()); }

  // Reverse-mode sweep from a 1x1 loss. Returns d loss / d p for every
  // parameter p, keyed by name; unreached parameters get zeros.
  Gradients backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Smallest nonzero |x| seen at any relu input; +inf if none.
  double min_relu_margin() const { return min_relu_margin_; }
  void note_relu_margin(double margin) {
    if (margin < min_relu_margin_) min_relu_margin_ = margin;
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    Tensor aux;
    std::vector<Var> inputs;
    Backprop backprop;
    std::string name;
    bool requires_grad = false;
    bool trainable = false;
    bool has_grad = false;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
  double min_relu_margin_ = 1e300;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }

}  // namespace tgcmc::diff

#endif  // TGCMC_DIFF_TAPE_HPP_

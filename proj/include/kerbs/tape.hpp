#pragma once

#include "kerbs/tensor.hpp"

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace kerbs {

// A trainable array together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)) {
    zero_grad();
  }

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  Eigen::Index size() const { return value.size(); }
};

class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Tensor& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Reverse-mode recording of tensor operations. One tape is built per
// forward pass and discarded after backward().
class Tape {
 public:
  using Inputs = std::span<const Tensor* const>;
  using Forward = std::function<Tensor(Inputs)>;
  // in_grads[i] is null when input i does not need a gradient. Implementations
  // accumulate (+=) into the non-null entries.
  using Backward = std::function<void(Inputs inputs, const Tensor& out,
                                      const Tensor& out_grad,
                                      std::span<Tensor* const> in_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf whose gradient is added into p.grad by backward().
  Var parameter(Parameter& p);

  Var record(std::string op, std::initializer_list<Var> inputs, Forward forward,
             Backward backward);

  const Tensor& value(Var v) const;
  // Gradient of the last backward() target with respect to v. Zero-sized
  // when v was not reached or needs no gradient.
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  const std::string& op_name(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and propagates in exact reverse recording
  // order. loss must be a 1x1 node of this tape.
  void backward(Var loss);
  const std::vector<std::size_t>& backward_order() const { return order_; }

  // Re-runs every recorded forward function in order and reports whether
  // each node value is reproduced bit for bit.
  bool replay_matches() const;

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor value;
    Tensor grad;
    Forward forward;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;
  std::vector<const Tensor*> input_values(const Node& n) const;

  std::vector<Node> nodes_;
  std::vector<std::size_t> order_;
};

}  // namespace kerbs

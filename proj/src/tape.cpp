#include "kerbs/tape.hpp"

#include "kerbs/errors.hpp"

#include <cstring>
#include <sstream>

namespace kerbs {

std::string shape_string(const Tensor& t) {
  std::ostringstream os;
  os << '[' << t.rows() << 'x' << t.cols() << ']';
  return os.str();
}

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kDegenerateVector: return "degenerate-vector";
    case ErrorKind::kVocab: return "vocab";
    case ErrorKind::kData: return "data";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.op = "parameter:" + p.name;
  n.value = p.value;
  n.param = &p;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string op, std::initializer_list<Var> inputs, Forward forward,
                 Backward backward) {
  Node n;
  n.op = std::move(op);
  for (const Var& v : inputs) {
    if (v.tape() != this) throw ContractError("tape: input from a different tape in " + n.op);
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  n.value = forward(input_values(n));
  n.forward = std::move(forward);
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape() != this || v.id() >= nodes_.size())
    throw ContractError("tape: variable does not belong to this tape");
  return nodes_[v.id()];
}

std::vector<const Tensor*> Tape::input_values(const Node& n) const {
  std::vector<const Tensor*> values;
  values.reserve(n.inputs.size());
  for (std::size_t i : n.inputs) values.push_back(&nodes_[i].value);
  return values;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }
const Tensor& Tape::grad(Var v) const { return node(v).grad; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }
const std::string& Tape::op_name(Var v) const { return node(v).op; }

void Tape::backward(Var loss) {
  const Node& target = node(loss);
  if (target.value.rows() != 1 || target.value.cols() != 1)
    throw ContractError("backward: loss must be a scalar, got " + shape_string(target.value));

  for (Node& n : nodes_) n.grad.resize(0, 0);
  order_.clear();
  order_.reserve(loss.id() + 1);
  nodes_[loss.id()].grad = Tensor::Ones(1, 1);

  std::vector<Tensor*> in_grads;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    order_.push_back(id);
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.value.rows() || n.param->grad.cols() != n.value.cols())
        n.param->zero_grad();
      n.param->grad += n.grad;
      continue;
    }
    if (!n.backward) continue;
    in_grads.assign(n.inputs.size(), nullptr);
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      Node& in = nodes_[n.inputs[k]];
      if (!in.requires_grad) continue;
      if (in.grad.size() == 0) in.grad.setZero(in.value.rows(), in.value.cols());
      in_grads[k] = &in.grad;
    }
    const auto values = input_values(n);
    n.backward(values, n.value, n.grad, in_grads);
  }
}

bool Tape::replay_matches() const {
  std::vector<Tensor> replayed(nodes_.size());
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const Node& n = nodes_[id];
    if (!n.forward) {
      replayed[id] = n.value;
      continue;
    }
    std::vector<const Tensor*> values;
    for (std::size_t i : n.inputs) values.push_back(&replayed[i]);
    replayed[id] = n.forward(values);
    const Tensor& original = n.value;
    if (replayed[id].rows() != original.rows() || replayed[id].cols() != original.cols())
      return false;
    for (Eigen::Index k = 0; k < original.size(); ++k) {
      const double a = original.data()[k];
      const double b = replayed[id].data()[k];
      if (std::memcmp(&a, &b, sizeof(double)) != 0) return false;
    }
  }
  return true;
}

}  // namespace kerbs

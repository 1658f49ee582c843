#include "kerbs/adam.hpp"

#include "kerbs/errors.hpp"

#include <cmath>

namespace kerbs {

void AdamState::reset_row(std::size_t param_index, Eigen::Index row) {
  if (param_index >= m.size()) return;
  m[param_index].row(row).setZero();
  v[param_index].row(row).setZero();
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (state.m.empty()) {
    for (const Parameter* p : params) {
      state.m.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Tensor::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.m.size() != params.size())
    throw DimensionError("adam_step: parameter count changed between steps");
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Parameter& p = *params[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        state.m[k].rows() != p.value.rows() || state.m[k].cols() != p.value.cols())
      throw DimensionError("adam_step: shape mismatch for " + p.name);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    auto m = state.m[k].array();
    auto v = state.v[k].array();
    const auto g = p.grad.array();
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.square();
    p.value.array() -=
        state.lr * (m / correction1) / ((v / correction2).sqrt() + state.eps_adam);
  }
}

}  // namespace kerbs

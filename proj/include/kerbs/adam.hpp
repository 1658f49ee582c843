#pragma once

#include "kerbs/tape.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace kerbs {

// Moment accumulators for one list of parameters. m[k] and v[k] belong to the
// k-th parameter passed to adam_step; the list order must stay fixed.
struct AdamState {
  std::int64_t step = 0;
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  // Zeroes the moments of one row of one parameter (used when a sense slot
  // changes owner).
  void reset_row(std::size_t param_index, Eigen::Index row);
};

// Bias-corrected Adam update using each parameter's grad. Moments are
// allocated on the first call.
void adam_step(AdamState& state, std::span<Parameter* const> params);

}  // namespace kerbs

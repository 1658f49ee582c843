#pragma once

#include "kerbs/tape.hpp"

#include <span>
#include <vector>

// Differentiable primitives recorded on a Tape. Every function throws
// DimensionError on shape mismatch.
namespace kerbs::ops {

Var matmul(Var a, Var b);     // a * b
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var add_row(Var a, Var row);  // a + broadcast 1xN row
Var affine(Var a, double scale, double shift);  // scale * a + shift
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var sum(Var a);  // 1x1
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
// out(r,0) = a(r, index[r])
Var pick(Var a, std::span<const int> index);
// 1x1 sum of a(r,0) * mask[r]; a must be a column.
Var masked_sum(Var a, std::span<const double> mask);
Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count);
// out.row(r) = table.row(ids[r])
Var gather_rows(Var table, std::span<const int> ids);
// out.row(r) = sum_j weights(r,j) * table.row(slots(r,j)); slot -1 is padding.
Var weighted_gather_rows(Var table, const IndexMatrix& slots, Var weights);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }

}  // namespace kerbs::ops

namespace kerbs {

// Stable softmax of a flat array (any shape, treated as one vector).
// Throws DimensionError when empty and NumericError on NaN.
Tensor softmax_stable(const Tensor& logits);
double log_sum_exp(std::span<const double> values);

}  // namespace kerbs

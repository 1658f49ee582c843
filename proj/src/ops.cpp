#include "kerbs/ops.hpp"

#include "kerbs/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kerbs {

Tensor softmax_stable(const Tensor& logits) {
  if (logits.size() == 0) throw DimensionError("softmax_stable: empty input");
  if (logits.array().isNaN().any()) throw NumericError("softmax_stable: NaN logit");
  const double peak = logits.maxCoeff();
  Tensor out = (logits.array() - peak).exp().matrix();
  out /= out.sum();
  return out;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double peak = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(peak)) return peak;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - peak);
  return peak + std::log(acc);
}

}  // namespace kerbs

namespace kerbs::ops {
namespace {

void require_same_shape(const char* op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.value()) +
                         " vs " + shape_string(b.value()));
}

template <typename ValueFn, typename DerivFn>
Var unary(const char* op, Var a, ValueFn value_fn, DerivFn deriv_fn) {
  // deriv_fn(x, y) returns dy/dx elementwise as an array expression.
  return a.tape()->record(
      op, {a},
      [value_fn](Tape::Inputs in) -> Tensor { return value_fn(in[0]->array()).matrix(); },
      [deriv_fn](Tape::Inputs in, const Tensor& out, const Tensor& g,
                 std::span<Tensor* const> grads) {
        if (grads[0]) grads[0]->array() += g.array() * deriv_fn(in[0]->array(), out.array());
      });
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.value()) + " * " +
                         shape_string(b.value()));
  return a.tape()->record(
      "matmul", {a, b}, [](Tape::Inputs in) -> Tensor { return (*in[0]) * (*in[1]); },
      [](Tape::Inputs in, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) grads[0]->noalias() += g * in[1]->transpose();
        if (grads[1]) grads[1]->noalias() += in[0]->transpose() * g;
      });
}

Var matmul_nt(Var a, Var b) {
  if (a.cols() != b.cols())
    throw DimensionError("matmul_nt: inner dimensions differ " + shape_string(a.value()) +
                         " * " + shape_string(b.value()) + "^T");
  return a.tape()->record(
      "matmul_nt", {a, b},
      [](Tape::Inputs in) -> Tensor { return (*in[0]) * in[1]->transpose(); },
      [](Tape::Inputs in, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) grads[0]->noalias() += g * (*in[1]);
        if (grads[1]) grads[1]->noalias() += g.transpose() * (*in[0]);
      });
}

Var add(Var a, Var b) {
  require_same_shape("add", a, b);
  return a.tape()->record(
      "add", {a, b}, [](Tape::Inputs in) -> Tensor { return *in[0] + *in[1]; },
      [](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) *grads[0] += g;
        if (grads[1]) *grads[1] += g;
      });
}

Var sub(Var a, Var b) {
  require_same_shape("sub", a, b);
  return a.tape()->record(
      "sub", {a, b}, [](Tape::Inputs in) -> Tensor { return *in[0] - *in[1]; },
      [](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) *grads[0] += g;
        if (grads[1]) *grads[1] -= g;
      });
}

Var mul(Var a, Var b) {
  require_same_shape("mul", a, b);
  return a.tape()->record(
      "mul", {a, b},
      [](Tape::Inputs in) -> Tensor { return in[0]->cwiseProduct(*in[1]); },
      [](Tape::Inputs in, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) *grads[0] += g.cwiseProduct(*in[1]);
        if (grads[1]) *grads[1] += g.cwiseProduct(*in[0]);
      });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw DimensionError("add_row: row " + shape_string(row.value()) + " does not broadcast to " +
                         shape_string(a.value()));
  return a.tape()->record(
      "add_row", {a, row},
      [](Tape::Inputs in) -> Tensor { return in[0]->rowwise() + in[1]->row(0); },
      [](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) *grads[0] += g;
        if (grads[1]) *grads[1] += g.colwise().sum();
      });
}

Var affine(Var a, double scale, double shift) {
  return a.tape()->record(
      "affine", {a},
      [scale, shift](Tape::Inputs in) -> Tensor {
        return (scale * in[0]->array() + shift).matrix();
      },
      [scale](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) *grads[0] += scale * g;
      });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a, [](const auto& x) { return 1.0 / (1.0 + (-x).exp()); },
      [](const auto&, const auto& y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](const auto& x) { return x.tanh(); },
      [](const auto&, const auto& y) { return 1.0 - y.square(); });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](const auto& x) { return x.exp(); },
      [](const auto&, const auto& y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](const auto& x) { return x.log(); },
      [](const auto& x, const auto&) { return x.inverse(); });
}

Var square(Var a) {
  return unary(
      "square", a, [](const auto& x) { return x.square(); },
      [](const auto& x, const auto&) { return 2.0 * x; });
}

Var sum(Var a) {
  return a.tape()->record(
      "sum", {a},
      [](Tape::Inputs in) -> Tensor { return Tensor::Constant(1, 1, in[0]->sum()); },
      [](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) grads[0]->array() += g(0, 0);
      });
}

namespace {

Tensor log_softmax_values(const Tensor& x) {
  Tensor out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double peak = x.row(r).maxCoeff();
    const double lse = peak + std::log((x.row(r).array() - peak).exp().sum());
    out.row(r) = x.row(r).array() - lse;
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a) {
  if (a.cols() == 0) throw DimensionError("softmax_rows: empty rows");
  return a.tape()->record(
      "softmax_rows", {a},
      [](Tape::Inputs in) -> Tensor { return log_softmax_values(*in[0]).array().exp().matrix(); },
      [](Tape::Inputs, const Tensor& y, const Tensor& g, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        const Eigen::VectorXd dots = (g.cwiseProduct(y)).rowwise().sum();
        grads[0]->array() += y.array() * (g.colwise() - dots).array();
      });
}

Var log_softmax_rows(Var a) {
  if (a.cols() == 0) throw DimensionError("log_softmax_rows: empty rows");
  return a.tape()->record(
      "log_softmax_rows", {a},
      [](Tape::Inputs in) -> Tensor { return log_softmax_values(*in[0]); },
      [](Tape::Inputs, const Tensor& y, const Tensor& g, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        const Eigen::VectorXd totals = g.rowwise().sum();
        const Tensor p = y.array().exp().matrix();
        *grads[0] += g - (p.array().colwise() * totals.array()).matrix();
      });
}

Var pick(Var a, std::span<const int> index) {
  if (static_cast<Eigen::Index>(index.size()) != a.rows())
    throw DimensionError("pick: index length differs from row count");
  for (int k : index)
    if (k < 0 || k >= a.cols()) throw DimensionError("pick: index out of range");
  std::vector<int> idx(index.begin(), index.end());
  return a.tape()->record(
      "pick", {a},
      [idx](Tape::Inputs in) -> Tensor {
        Tensor out(in[0]->rows(), 1);
        for (Eigen::Index r = 0; r < out.rows(); ++r) out(r, 0) = (*in[0])(r, idx[r]);
        return out;
      },
      [idx](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (Eigen::Index r = 0; r < g.rows(); ++r) (*grads[0])(r, idx[r]) += g(r, 0);
      });
}

Var masked_sum(Var a, std::span<const double> mask) {
  if (a.cols() != 1 || static_cast<Eigen::Index>(mask.size()) != a.rows())
    throw DimensionError("masked_sum: expected a column matching the mask length");
  Eigen::VectorXd m = Eigen::Map<const Eigen::VectorXd>(mask.data(), mask.size());
  return a.tape()->record(
      "masked_sum", {a},
      [m](Tape::Inputs in) -> Tensor {
        double acc = 0.0;
        for (Eigen::Index r = 0; r < m.size(); ++r)
          if (m[r] != 0.0) acc += m[r] * (*in[0])(r, 0);
        return Tensor::Constant(1, 1, acc);
      },
      [m](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (grads[0]) grads[0]->col(0) += g(0, 0) * m;
      });
}

Var slice_cols(Var a, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > a.cols())
    throw DimensionError("slice_cols: range outside " + shape_string(a.value()));
  return a.tape()->record(
      "slice_cols", {a},
      [begin, count](Tape::Inputs in) -> Tensor { return in[0]->middleCols(begin, count); },
      [begin, count](Tape::Inputs, const Tensor&, const Tensor& g,
                     std::span<Tensor* const> grads) {
        if (grads[0]) grads[0]->middleCols(begin, count) += g;
      });
}

Var gather_rows(Var table, std::span<const int> ids) {
  for (int id : ids)
    if (id < 0 || id >= table.rows()) throw DimensionError("gather_rows: row index out of range");
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape()->record(
      "gather_rows", {table},
      [idx](Tape::Inputs in) -> Tensor {
        Tensor out(static_cast<Eigen::Index>(idx.size()), in[0]->cols());
        for (std::size_t r = 0; r < idx.size(); ++r) out.row(r) = in[0]->row(idx[r]);
        return out;
      },
      [idx](Tape::Inputs, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        if (!grads[0]) return;
        for (std::size_t r = 0; r < idx.size(); ++r) grads[0]->row(idx[r]) += g.row(r);
      });
}

Var weighted_gather_rows(Var table, const IndexMatrix& slots, Var weights) {
  if (weights.rows() != slots.rows() || weights.cols() != slots.cols())
    throw DimensionError("weighted_gather_rows: weights " + shape_string(weights.value()) +
                         " do not match slot layout");
  for (Eigen::Index k = 0; k < slots.size(); ++k)
    if (slots.data()[k] < -1 || slots.data()[k] >= table.rows())
      throw DimensionError("weighted_gather_rows: slot out of range");
  return table.tape()->record(
      "weighted_gather_rows", {table, weights},
      [slots](Tape::Inputs in) -> Tensor {
        const Tensor& w = *in[1];
        Tensor out = Tensor::Zero(slots.rows(), in[0]->cols());
        for (Eigen::Index r = 0; r < slots.rows(); ++r)
          for (Eigen::Index j = 0; j < slots.cols(); ++j)
            if (slots(r, j) >= 0) out.row(r) += w(r, j) * in[0]->row(slots(r, j));
        return out;
      },
      [slots](Tape::Inputs in, const Tensor&, const Tensor& g, std::span<Tensor* const> grads) {
        const Tensor& w = *in[1];
        for (Eigen::Index r = 0; r < slots.rows(); ++r)
          for (Eigen::Index j = 0; j < slots.cols(); ++j) {
            const int s = slots(r, j);
            if (s < 0) continue;
            if (grads[0]) grads[0]->row(s) += w(r, j) * g.row(r);
            if (grads[1]) (*grads[1])(r, j) += g.row(r).dot(in[0]->row(s));
          }
      });
}

}  // namespace kerbs::ops

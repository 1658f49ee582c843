#include "kerbs/kerbs_head.hpp"

#include "kerbs/errors.hpp"
#include "kerbs/kernel.hpp"
#include "kerbs/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace kerbs {

Vector sense_logits(const Vector& h, const SenseTable& table) {
  if (h.size() != table.dim())
    throw DimensionError("sense_logits: context has dimension " + std::to_string(h.size()) +
                         ", table expects " + std::to_string(table.dim()));
  const double h_norm = h.norm();
  if (h_norm == 0.0) throw DegenerateVectorError("sense_logits: zero-norm context vector");
  const double nh = std::max(h_norm, kernel::kNormFloor);
  const Tensor& w = table.embeddings.value;
  Vector logits(table.total_senses());
  for (int k = 0; k < table.total_senses(); ++k) {
    const double nk = std::max(w.row(k).norm(), kernel::kNormFloor);
    const double c = w.row(k).dot(h) / (nh * nk);
    logits[k] = nh * nk * kernel::profile(c, table.theta.value(k, 0));
  }
  return logits;
}

SenseDistribution sense_posterior(const Vector& h, const SenseTable& table) {
  return {Vector(softmax_stable(Tensor(sense_logits(h, table))))};
}

Vector word_probs(const SenseDistribution& dist, const SenseTable& table) {
  if (dist.probs.size() != table.total_senses())
    throw DimensionError("word_probs: distribution length differs from total senses");
  Vector out(table.vocab_size());
  for (int w = 0; w < table.vocab_size(); ++w)
    out[w] = dist.probs.segment(table.offset(w), table.count(w)).sum();
  return out;
}

Vector word_log_probs(const Vector& logits, const SenseTable& table) {
  const double all = log_sum_exp(std::span<const double>(logits.data(), logits.size()));
  Vector out(table.vocab_size());
  for (int w = 0; w < table.vocab_size(); ++w)
    out[w] = log_sum_exp(std::span<const double>(logits.data() + table.offset(w),
                                                 table.count(w))) -
             all;
  return out;
}

Vector conditional_sense_weights(const SenseDistribution& dist, int word,
                                 const SenseTable& table) {
  if (word < 0 || word >= table.vocab_size())
    throw VocabError("conditional_sense_weights: word id out of range");
  const int m = table.count(word);
  if (m < 1) throw ContractError("conditional_sense_weights: word owns no senses");
  Vector weights = dist.probs.segment(table.offset(word), m);
  const double total = weights.sum();
  // Uniform fallback once the block has underflowed.
  if (!(total >= std::numeric_limits<double>::min())) return Vector::Constant(m, 1.0 / m);
  return weights / total;
}

Vector compose_input_embedding(int word, const Vector& weights, const SenseTable& table) {
  if (word < 0 || word >= table.vocab_size())
    throw VocabError("compose_input_embedding: word id out of range");
  if (weights.size() != table.count(word))
    throw DimensionError("compose_input_embedding: expected " +
                         std::to_string(table.count(word)) + " weights, got " +
                         std::to_string(weights.size()));
  return table.embeddings.value.middleRows(table.offset(word), table.count(word)).transpose() *
         weights;
}

namespace ops {
namespace {

struct HeadLayout {
  std::vector<int> target_offset;
  std::vector<int> target_count;
  int width = 0;
};

using Array = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Taylor coefficients 1 / (k+1)! of E and (k+1) / (k+2)! of -E'(-y).
struct SeriesCoefficients {
  std::array<double, kernel::kSeriesTerms> e{};
  std::array<double, kernel::kSeriesTerms> de{};
  SeriesCoefficients() {
    double fact = 1.0;  // (k+1)!
    for (int k = 0; k < kernel::kSeriesTerms; ++k) {
      fact *= k + 1;
      e[k] = 1.0 / fact;
      de[k] = (k + 1) / (fact * (k + 2));
    }
  }
};

const SeriesCoefficients& series() {
  static const SeriesCoefficients c;
  return c;
}

// E(x) elementwise, given exp(-x).
Array expm1_ratio(const Array& x, const Array& exp_neg) {
  const auto& c = series().e;
  Array acc = Array::Constant(x.rows(), x.cols(), c.back());
  for (int k = kernel::kSeriesTerms - 2; k >= 0; --k) acc = acc * (-x) + c[k];
  return (x.abs() >= kernel::kSeriesRadius).select((1.0 - exp_neg) / x, acc);
}

// E'(x) elementwise, given exp(-x) and E(x).
Array expm1_ratio_derivative(const Array& x, const Array& exp_neg, const Array& e) {
  const auto& c = series().de;
  Array acc = Array::Constant(x.rows(), x.cols(), c.back());
  for (int k = kernel::kSeriesTerms - 2; k >= 0; --k) acc = acc * (-x) + c[k];
  return (x.abs() >= kernel::kSeriesRadius).select((exp_neg - e) / x, -acc);
}

struct KernelTerms {
  Array cos;     // B x M
  Array dot;     // B x M, h . w
  Array x;       // theta * cos
  Array exp_neg; // exp(-x)
  Array e;       // E(x)
  Tensor logits;
  Eigen::VectorXd h_norm;
  Eigen::RowVectorXd w_norm;
  Eigen::RowVectorXd inv_d;
};

KernelTerms kernel_terms(const Tensor& h, const Tensor& w, const Tensor& theta) {
  KernelTerms t;
  t.h_norm = h.rowwise().norm().cwiseMax(kernel::kNormFloor);
  t.w_norm = w.rowwise().norm().cwiseMax(kernel::kNormFloor).transpose();
  Tensor dot = h * w.transpose();
  t.dot = dot.array();
  t.cos = t.dot.colwise() / t.h_norm.array();
  t.cos.rowwise() /= t.w_norm.array();
  t.inv_d.resize(w.rows());
  for (Eigen::Index k = 0; k < w.rows(); ++k) t.inv_d[k] = 1.0 / kernel::denominator(theta(k, 0));
  t.x = t.cos.rowwise() * theta.col(0).transpose().array();
  t.exp_neg = (-t.x).exp();
  t.e = expm1_ratio(t.x, t.exp_neg);
  t.logits = ((t.dot * t.e).rowwise() * t.inv_d.array()).matrix();
  return t;
}

double row_log_sum_exp(const Tensor& m, Eigen::Index row, Eigen::Index begin, Eigen::Index n) {
  const auto seg = m.row(row).segment(begin, n);
  const double peak = seg.maxCoeff();
  return peak + std::log((seg.array() - peak).exp().sum());
}

}  // namespace

Var kerbs_head(Var context, Var embeddings, Var theta, const SenseTable& table,
               std::span<const int> targets, int width) {
  if (context.cols() != embeddings.cols())
    throw DimensionError("kerbs_head: context " + shape_string(context.value()) +
                         " and embeddings " + shape_string(embeddings.value()) + " differ in width");
  if (embeddings.rows() != table.total_senses() || theta.rows() != table.total_senses() ||
      theta.cols() != 1)
    throw DimensionError("kerbs_head: parameters do not match the sense table");
  if (static_cast<Eigen::Index>(targets.size()) != context.rows())
    throw DimensionError("kerbs_head: one target per context row required");
  auto layout = std::make_shared<HeadLayout>();
  layout->width = width;
  for (int y : targets) {
    if (y < 0 || y >= table.vocab_size()) throw VocabError("kerbs_head: target id out of range");
    if (table.count(y) > width) throw DimensionError("kerbs_head: width below sense count");
    layout->target_offset.push_back(table.offset(y));
    layout->target_count.push_back(table.count(y));
  }

  auto forward = [layout](Tape::Inputs in) -> Tensor {
    const KernelTerms t = kernel_terms(*in[0], *in[1], *in[2]);
    const Eigen::Index rows = t.logits.rows();
    Tensor out = Tensor::Zero(rows, 1 + layout->width);
    for (Eigen::Index b = 0; b < rows; ++b) {
      const int off = layout->target_offset[b];
      const int cnt = layout->target_count[b];
      const double all = row_log_sum_exp(t.logits, b, 0, t.logits.cols());
      const double word = row_log_sum_exp(t.logits, b, off, cnt);
      out(b, 0) = word - all;
      for (int j = 0; j < cnt; ++j) out(b, 1 + j) = std::exp(t.logits(b, off + j) - word);
    }
    return out;
  };

  auto backward = [layout](Tape::Inputs in, const Tensor& out, const Tensor& g,
                           std::span<Tensor* const> grads) {
    const Tensor& h = *in[0];
    const Tensor& w = *in[1];
    const Tensor& theta_v = *in[2];
    const KernelTerms t = kernel_terms(h, w, theta_v);
    const Eigen::Index rows = t.logits.rows();
    const Eigen::Index slots = t.logits.cols();

    // dL/dlogits.
    Tensor dz(rows, slots);
    for (Eigen::Index b = 0; b < rows; ++b) {
      const double all = row_log_sum_exp(t.logits, b, 0, slots);
      dz.row(b) = -g(b, 0) * (t.logits.row(b).array() - all).exp();
      const int off = layout->target_offset[b];
      const int cnt = layout->target_count[b];
      double mean_g = 0.0;
      for (int j = 0; j < cnt; ++j) mean_g += g(b, 1 + j) * out(b, 1 + j);
      for (int j = 0; j < cnt; ++j) {
        const double q = out(b, 1 + j);
        dz(b, off + j) += g(b, 0) * q + q * (g(b, 1 + j) - mean_g);
      }
    }

    Eigen::RowVectorXd d_ratio(slots);  // D'(theta) / D(theta)
    for (Eigen::Index k = 0; k < slots; ++k)
      d_ratio[k] = kernel::denominator_derivative(theta_v(k, 0)) * t.inv_d[k];
    const Array dza = dz.array();
    // dz * df/dc and dz * (f - c df/dc), both scaled by 1/D.
    const Tensor along = ((dza * t.exp_neg).rowwise() * t.inv_d.array()).matrix();
    const Tensor radial =
        ((dza * t.cos * (t.e - t.exp_neg)).rowwise() * t.inv_d.array()).matrix();
    const Array de = expm1_ratio_derivative(t.x, t.exp_neg, t.e);
    const Array dtheta_terms =
        (dza * t.dot * (t.cos * de - t.e.rowwise() * d_ratio.array())).rowwise() *
        t.inv_d.array();
    const Eigen::VectorXd dtheta = dtheta_terms.colwise().sum().transpose().matrix();
    if (grads[0]) {
      grads[0]->noalias() += along * w;
      const Eigen::VectorXd coef =
          (radial * t.w_norm.transpose()).cwiseQuotient(t.h_norm);
      *grads[0] += (h.array().colwise() * coef.array()).matrix();
    }
    if (grads[1]) {
      grads[1]->noalias() += along.transpose() * h;
      const Eigen::VectorXd coef =
          (radial.transpose() * t.h_norm).cwiseQuotient(t.w_norm.transpose());
      *grads[1] += (w.array().colwise() * coef.array()).matrix();
    }
    if (grads[2]) grads[2]->col(0) += dtheta;
  };

  return context.tape()->record("kerbs_head", {context, embeddings, theta}, std::move(forward),
                                std::move(backward));
}

}  // namespace ops
}  // namespace kerbs

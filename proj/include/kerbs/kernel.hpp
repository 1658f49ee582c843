#pragma once

#include "kerbs/errors.hpp"

#include <Eigen/Dense>

#include <cmath>

// The variance kernel K_theta(h, e) = |h||e| (a exp(-theta cos) - a) with
// a = -theta / (2 (exp(-theta) + theta - 1)).
//
// Everything is evaluated through the factorization
//
//   a (exp(-theta c) - 1) = c * E(theta c) / D(theta)
//   E(x) = (1 - exp(-x)) / x,   D(theta) = 2 (exp(-theta) + theta - 1) / theta^2
//
// E and D are entire functions with E(0) = D(0) = 1, so the kernel is smooth
// through theta = 0 (where it equals the inner product) and exactly zero at
// cos = 0. Near zero both are summed from their Taylor series.
namespace kerbs::kernel {

// |x| below this uses the Taylor series for E, E', D, D'.
inline constexpr double kSeriesRadius = 0.5;
inline constexpr int kSeriesTerms = 18;
inline constexpr double kNormFloor = 1e-12;
inline constexpr double kThetaBound = 10.0;

// E(x) = sum_k (-x)^k / (k+1)!
template <typename Scalar>
Scalar expm1_ratio(Scalar x) {
  using std::abs;
  using std::expm1;
  if (abs(x) >= Scalar(kSeriesRadius)) return -expm1(-x) / x;
  Scalar term = Scalar(1);
  Scalar acc = Scalar(1);
  for (int k = 1; k < kSeriesTerms; ++k) {
    term *= -x / Scalar(k + 1);
    acc += term;
    if (abs(term) < Scalar(1e-17)) break;
  }
  return acc;
}

// E'(x) = sum_{k>=1} k (-1)^k x^(k-1) / (k+1)!
template <typename Scalar>
Scalar expm1_ratio_derivative(Scalar x) {
  using std::abs;
  using std::exp;
  if (abs(x) >= Scalar(kSeriesRadius)) return (exp(-x) - expm1_ratio(x)) / x;
  Scalar power = Scalar(1);      // (-x)^(k-1)
  Scalar factorial = Scalar(2);  // (k+1)!
  Scalar acc = Scalar(0);
  for (int k = 1; k <= kSeriesTerms; ++k) {
    const Scalar term = Scalar(k) * power / factorial;
    acc -= term;
    if (abs(term) < Scalar(1e-17)) break;
    power *= -x;
    factorial *= Scalar(k + 2);
  }
  return acc;
}

// D(theta) = 2 sum_k (-theta)^k / (k+2)!
template <typename Scalar>
Scalar denominator(Scalar theta) {
  using std::abs;
  using std::expm1;
  if (abs(theta) >= Scalar(kSeriesRadius))
    return Scalar(2) * (expm1(-theta) + theta) / (theta * theta);
  Scalar term = Scalar(1);
  Scalar acc = Scalar(1);
  for (int k = 1; k < kSeriesTerms; ++k) {
    term *= -theta / Scalar(k + 2);
    acc += term;
    if (abs(term) < Scalar(1e-17)) break;
  }
  return acc;
}

// D'(theta) = 2 sum_{k>=1} k (-1)^k theta^(k-1) / (k+2)!
template <typename Scalar>
Scalar denominator_derivative(Scalar theta) {
  using std::abs;
  if (abs(theta) >= Scalar(kSeriesRadius))
    return Scalar(2) * (expm1_ratio(theta) - denominator(theta)) / theta;
  Scalar power = Scalar(1);
  Scalar factorial = Scalar(6);  // (k+2)! at k = 1
  Scalar acc = Scalar(0);
  for (int k = 1; k <= kSeriesTerms; ++k) {
    const Scalar term = Scalar(2 * k) * power / factorial;
    acc -= term;
    if (abs(term) < Scalar(1e-17)) break;
    power *= -theta;
    factorial *= Scalar(k + 3);
  }
  return acc;
}

// a(theta). Signed infinity at theta = +-0.
template <typename Scalar>
Scalar normalization_factor(Scalar theta) {
  return Scalar(-1) / (theta * denominator(theta));
}

// f(c, theta) = a (exp(-theta c) - 1), the kernel for unit-norm inputs.
template <typename Scalar>
Scalar profile(Scalar c, Scalar theta) {
  return c * expm1_ratio(theta * c) / denominator(theta);
}

// df/dc = exp(-theta c) / D(theta) > 0.
template <typename Scalar>
Scalar profile_dcos(Scalar c, Scalar theta) {
  using std::exp;
  return exp(-theta * c) / denominator(theta);
}

// df/dtheta = (c / D) (c E'(theta c) - E(theta c) D'(theta) / D(theta)).
template <typename Scalar>
Scalar profile_dtheta(Scalar c, Scalar theta) {
  const Scalar d = denominator(theta);
  const Scalar x = theta * c;
  return c / d * (c * expm1_ratio_derivative(x) - expm1_ratio(x) * denominator_derivative(theta) / d);
}

template <typename DerivedH, typename DerivedE>
typename DerivedH::Scalar cosine(const Eigen::MatrixBase<DerivedH>& h,
                                 const Eigen::MatrixBase<DerivedE>& e) {
  using Scalar = typename DerivedH::Scalar;
  using std::max;
  const Scalar nh = max(h.norm(), Scalar(kNormFloor));
  const Scalar ne = max(e.norm(), Scalar(kNormFloor));
  return h.dot(e) / (nh * ne);
}

template <typename DerivedH, typename DerivedE>
void require_nondegenerate(const Eigen::MatrixBase<DerivedH>& h,
                           const Eigen::MatrixBase<DerivedE>& e) {
  if (h.size() != e.size())
    throw DimensionError("kernel: h and e have different dimensions");
  if (h.norm() == 0 || e.norm() == 0)
    throw DegenerateVectorError("kernel: zero-norm input vector");
}

}  // namespace kerbs::kernel

namespace kerbs {

template <typename Scalar>
Scalar normalization_factor(Scalar theta) {
  return kernel::normalization_factor(theta);
}

// K_theta(h, e). Throws DegenerateVectorError for zero-norm inputs.
template <typename DerivedH, typename DerivedE>
typename DerivedH::Scalar kernel_eval(const Eigen::MatrixBase<DerivedH>& h,
                                      const Eigen::MatrixBase<DerivedE>& e,
                                      typename DerivedH::Scalar theta) {
  kernel::require_nondegenerate(h, e);
  const auto c = kernel::cosine(h, e);
  return h.norm() * e.norm() * kernel::profile(c, theta);
}

// d log|K| / d theta written as (1/a)(da/dtheta) - c exp(-theta c) / (exp(-theta c) - 1).
// Kept independent of the E/D factorization so it can cross-check it.
template <typename DerivedH, typename DerivedE>
typename DerivedH::Scalar kernel_grad_theta(const Eigen::MatrixBase<DerivedH>& h,
                                            const Eigen::MatrixBase<DerivedE>& e,
                                            typename DerivedH::Scalar theta) {
  using Scalar = typename DerivedH::Scalar;
  using std::abs;
  using std::exp;
  using std::expm1;
  kernel::require_nondegenerate(h, e);
  const Scalar c = kernel::cosine(h, e);
  if (abs(theta) < Scalar(1e-4)) {
    // Second-order expansion in theta.
    return Scalar(1) / 3 - c / 2 + theta * (c * c / 12 - Scalar(1) / 18) + theta * theta / 270;
  }
  // (1/a) da/dtheta = 1/theta - g'/g with g = exp(-theta) + theta - 1.
  const Scalar g = expm1(-theta) + theta;
  const Scalar g_prime = -expm1(-theta);
  const Scalar log_a_slope = Scalar(1) / theta - g_prime / g;
  const Scalar x = theta * c;
  // -c e^{-x} / (e^{-x} - 1) = c / expm1(x); -> 1/theta at c = 0.
  const Scalar cos_term = abs(x) < Scalar(1e-5)
                              ? Scalar(1) / theta - c / 2 + theta * c * c / 12
                              : c / expm1(x);
  return log_a_slope + cos_term;
}

}  // namespace kerbs

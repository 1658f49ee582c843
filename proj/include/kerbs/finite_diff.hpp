#pragma once

#include "kerbs/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace kerbs {

// Central-difference gradient (f(x+h) - f(x-h)) / 2h per coordinate.
// Throws NumericError when any evaluation is non-finite.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

// Richardson-extrapolated central difference of a scalar function at x:
// (4 D(h/2) - D(h)) / 3. Throws NumericError on a non-finite evaluation.
double richardson_derivative(const std::function<double(double)>& f, double x, double h = 1e-3);

// Relative error |a - b| / max(|a|, |b|, floor), the comparison used by every
// gradient check in the project.
inline double relative_error(double a, double b, double floor = 1e-6) {
  const double scale = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / scale;
}

}  // namespace kerbs

#include "kerbs/finite_diff.hpp"

#include "kerbs/errors.hpp"

#include <cmath>
#include <string>

namespace kerbs {

Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h) {
  Tensor probe = x;
  Tensor grad(x.rows(), x.cols());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double saved = probe.data()[k];
    probe.data()[k] = saved + h;
    const double up = f(probe);
    probe.data()[k] = saved - h;
    const double down = f(probe);
    probe.data()[k] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("finite_diff_grad: non-finite evaluation at coordinate " +
                         std::to_string(k));
    grad.data()[k] = (up - down) / (2.0 * h);
  }
  return grad;
}

double richardson_derivative(const std::function<double(double)>& f, double x, double h) {
  const auto central = [&](double step) {
    const double up = f(x + step);
    const double down = f(x - step);
    if (!std::isfinite(up) || !std::isfinite(down))
      throw NumericError("richardson_derivative: non-finite evaluation");
    return (up - down) / (2.0 * step);
  };
  return (4.0 * central(0.5 * h) - central(h)) / 3.0;
}

}  // namespace kerbs

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

namespace kerbs {

// Dense row-major 64-bit array. Vectors are 1xN or Nx1 tensors.
using Tensor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using IndexMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

template <typename MatrixType>
MatrixType random_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                          typename MatrixType::Scalar lo,
                          typename MatrixType::Scalar hi) {
  std::uniform_real_distribution<typename MatrixType::Scalar> dist{lo, hi};
  MatrixType out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = dist(rng);
  return out;
}

template <typename MatrixType>
MatrixType random_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng,
                         typename MatrixType::Scalar stddev) {
  std::normal_distribution<typename MatrixType::Scalar> dist{0, stddev};
  MatrixType out(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out(r, c) = dist(rng);
  return out;
}

std::string shape_string(const Tensor& t);

}  // namespace kerbs

#pragma once

#include <cmath>

#include "icftab/nn/tensor.hpp"

namespace icftab::nn {

template <typename Scalar>
struct LossResult {
  double value = 0.0;
  Tensor<Scalar> grad;  // same shape as the prediction, already divided by N
};

/// Mean binary cross-entropy on logits (1 x N) against 0/1 targets,
/// max(z, 0) - z*y + log(1 + exp(-|z|)).
template <typename Scalar>
LossResult<Scalar> bce_with_logits(const Tensor<Scalar>& logits, const Vector<Scalar>& y) {
  const Index n = logits.data.cols();
  if (logits.data.rows() != 1 || y.size() != n) throw ContractError("bce_with_logits: shape mismatch");
  LossResult<Scalar> r;
  r.grad.length = 1;
  r.grad.data.resize(1, n);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const double z = static_cast<double>(logits.data(0, i));
    const double t = static_cast<double>(y(i));
    total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
    const double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    r.grad.data(0, i) = static_cast<Scalar>((sig - t) * inv_n);
  }
  r.value = total * inv_n;
  return r;
}

/// Mean squared error on predictions (1 x N).
template <typename Scalar>
LossResult<Scalar> mse(const Tensor<Scalar>& pred, const Vector<Scalar>& y) {
  const Index n = pred.data.cols();
  if (pred.data.rows() != 1 || y.size() != n) throw ContractError("mse: shape mismatch");
  LossResult<Scalar> r;
  r.grad.length = 1;
  r.grad.data.resize(1, n);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred.data(0, i)) - static_cast<double>(y(i));
    total += d * d;
    r.grad.data(0, i) = static_cast<Scalar>(2.0 * d * inv_n);
  }
  r.value = total * inv_n;
  return r;
}

}  // namespace icftab::nn

#pragma once

#include <cmath>
#include <utility>

#include "ofsr/tensor.hpp"

namespace ofsr {

/// Endpoint-error loss over (b, 2, h, w) flow tensors: mean over batch and
/// pixels of the per-pixel Euclidean distance between prediction and target.
/// The distance is stabilized as sqrt(d^2 + eps^2) so the gradient vanishes
/// smoothly where prediction and target coincide.
template <typename T>
std::pair<T, Tensor<T>> epe_loss_grad(const Tensor<T>& pred, const Tensor<T>& gt,
                                      T eps = T(1e-8)) {
  const Shape& s = pred.shape();
  if (s != gt.shape()) {
    throw std::invalid_argument("epe_loss_grad: shape mismatch " + s.str() +
                                " vs " + gt.shape().str());
  }
  if (s.c != 2) {
    throw std::invalid_argument("epe_loss_grad: expected 2 channels (u, v), got " +
                                s.str());
  }
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  const T n = static_cast<T>(static_cast<std::size_t>(s.b) * plane);
  Tensor<T> grad(s);
  double loss = 0;  // accumulate in double regardless of T
  for (int b = 0; b < s.b; ++b) {
    const std::size_t base = static_cast<std::size_t>(b) * 2 * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      const T du = pred[base + p] - gt[base + p];
      const T dv = pred[base + plane + p] - gt[base + plane + p];
      const T dist = std::sqrt(du * du + dv * dv + eps * eps);
      loss += static_cast<double>(dist);
      grad[base + p] = du / (dist * n);
      grad[base + plane + p] = dv / (dist * n);
    }
  }
  return {static_cast<T>(loss / static_cast<double>(n)), std::move(grad)};
}

}  // namespace ofsr

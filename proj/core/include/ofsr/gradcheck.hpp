#pragma once

// Central finite differences, the independent oracle the tape gradients are
// checked against. Double precision only.

#include <functional>

#include "ofsr/tensor.hpp"

namespace ofsr {

/// Per-element central difference (f(x + eps e_i) - f(x - eps e_i)) / (2 eps).
inline Tensor<double> finite_diff_grad(
    const std::function<double(const Tensor<double>&)>& loss_fn,
    const Tensor<double>& x, double eps = 1e-6) {
  Tensor<double> grad(x.shape());
  Tensor<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double plus = loss_fn(probe);
    probe[i] = orig - eps;
    const double minus = loss_fn(probe);
    probe[i] = orig;
    grad[i] = (plus - minus) / (2.0 * eps);
  }
  return grad;
}

/// Same, restricted to a subset of flat indices (for large tensors).
inline void finite_diff_grad_at(
    const std::function<double(const Tensor<double>&)>& loss_fn,
    Tensor<double>& x, const std::vector<std::size_t>& indices, double eps,
    std::vector<double>& out) {
  out.clear();
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    const double orig = x[i];
    x[i] = orig + eps;
    const double plus = loss_fn(x);
    x[i] = orig - eps;
    const double minus = loss_fn(x);
    x[i] = orig;
    out.push_back((plus - minus) / (2.0 * eps));
  }
}

}  // namespace ofsr

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ofsr/errors.hpp"
#include "ofsr/tensor.hpp"

namespace ofsr {

/// First/second moment accumulators for one list of parameter tensors.
/// Slot order mirrors the parameter list handed to adam_step.
template <typename T>
struct AdamState {
  struct Slot {
    Tensor<T> m;
    Tensor<T> v;
  };
  std::vector<Slot> slots;
  std::int64_t step_count = 0;
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);

  static AdamState init(const std::vector<Tensor<T>*>& params) {
    AdamState s;
    s.slots.reserve(params.size());
    for (const Tensor<T>* p : params) {
      s.slots.push_back(Slot{Tensor<T>(p->shape()), Tensor<T>(p->shape())});
    }
    return s;
  }
};

/// One bias-corrected Adam update, in place. `names` is used only for
/// diagnostics when a gradient is non-finite; it may be empty.
template <typename T>
void adam_step(const std::vector<Tensor<T>*>& params,
               const std::vector<const Tensor<T>*>& grads, AdamState<T>& state,
               T learning_rate, const std::vector<std::string>& names = {}) {
  if (params.size() != grads.size() || params.size() != state.slots.size()) {
    throw std::invalid_argument("adam_step: parameter/gradient/state list sizes differ");
  }
  if (!(learning_rate > T(0))) {
    throw std::invalid_argument("adam_step: learning rate must be positive");
  }
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const T bc1 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta1), t));
  const T bc2 = static_cast<T>(1.0 - std::pow(static_cast<double>(state.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    if (p.shape() != g.shape()) {
      throw std::invalid_argument("adam_step: shape mismatch at slot " +
                                  std::to_string(i));
    }
    if (!g.all_finite()) {
      const std::string who = i < names.size() ? names[i] : ("slot " + std::to_string(i));
      throw numeric_error("adam_step: non-finite gradient in " + who);
    }
    typename AdamState<T>::Slot& slot = state.slots[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      slot.m[j] = state.beta1 * slot.m[j] + (T(1) - state.beta1) * g[j];
      slot.v[j] = state.beta2 * slot.v[j] + (T(1) - state.beta2) * g[j] * g[j];
      const T m_hat = slot.m[j] / bc1;
      const T v_hat = slot.v[j] / bc2;
      p[j] -= learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace ofsr

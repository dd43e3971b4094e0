#pragma once

// Reverse-mode autodiff over the fixed op set the network needs. Every op
// appends its output value plus a pull-back closure; backward() replays the
// closures once, in reverse execution order.

#include <functional>
#include <utility>
#include <vector>

#include "ofsr/kernels.hpp"
#include "ofsr/loss.hpp"

namespace ofsr {

template <typename T>
class GradTape {
 public:
  using Id = std::size_t;

  /// Register an input or parameter value; participates in backward.
  Id leaf(Tensor<T> value) { return push(std::move(value), nullptr); }

  const Tensor<T>& value(Id id) const { return values_[id]; }

  /// Gradient of the backward root w.r.t. value `id`. Valid after backward();
  /// values never touched by the sweep report an all-zero tensor.
  const Tensor<T>& grad(Id id) const { return grads_[id]; }

  std::size_t num_values() const { return values_.size(); }

  Id conv2d(Id input, Id weight, Id bias) {
    ConvLayer<T> layer(values_[weight], values_[bias]);
    Id out = push(conv2d_forward(values_[input], layer), nullptr);
    pulls_.back() = [this, input, weight, bias, out]() {
      ConvLayer<T> l(values_[weight], values_[bias]);
      ConvGrads<T> g = conv2d_backward(grads_[out], values_[input], l);
      accumulate(input, g.input);
      accumulate(weight, g.weight);
      accumulate(bias, g.bias);
    };
    return out;
  }

  Id relu(Id input) {
    Id out = push(relu_forward(values_[input]), nullptr);
    pulls_.back() = [this, input, out]() {
      accumulate(input, relu_backward(grads_[out], values_[input]));
    };
    return out;
  }

  Id concat(std::vector<Id> inputs) {
    std::vector<const Tensor<T>*> ptrs;
    ptrs.reserve(inputs.size());
    for (Id id : inputs) ptrs.push_back(&values_[id]);
    Id out = push(concat_channels(ptrs), nullptr);
    pulls_.back() = [this, inputs = std::move(inputs), out]() {
      int offset = 0;
      for (Id id : inputs) {
        const int c = values_[id].shape().c;
        accumulate(id, slice_channels(grads_[out], offset, c));
        offset += c;
      }
    };
    return out;
  }

  Id pixel_shuffle(Id input, int r) {
    Id out = push(ofsr::pixel_shuffle(values_[input], r), nullptr);
    pulls_.back() = [this, input, out, r]() {
      accumulate(input, pixel_unshuffle(grads_[out], r));
    };
    return out;
  }

  Id add(Id a, Id b) {
    Id out = push(ofsr::add(values_[a], values_[b]), nullptr);
    pulls_.back() = [this, a, b, out]() {
      accumulate(a, grads_[out]);
      accumulate(b, grads_[out]);
    };
    return out;
  }

  /// Scalar endpoint-error loss against a fixed (non-differentiated) target.
  Id epe_loss(Id pred, Tensor<T> target) {
    auto [loss, grad] = epe_loss_grad(values_[pred], target);
    Tensor<T> scalar(Shape{1, 1, 1, 1});
    scalar[0] = loss;
    Id out = push(std::move(scalar), nullptr);
    pulls_.back() = [this, pred, out, grad = std::move(grad)]() {
      Tensor<T> g = grad;
      const T seed = grads_[out][0];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= seed;
      accumulate(pred, g);
    };
    return out;
  }

  /// Reverse sweep from a scalar root. A tape can be swept exactly once.
  void backward(Id root) {
    if (spent_) {
      throw std::logic_error("GradTape: backward called twice on the same tape");
    }
    if (values_[root].size() != 1) {
      throw std::invalid_argument("GradTape: backward root must be scalar, got " +
                                  values_[root].shape().str());
    }
    spent_ = true;
    grads_.clear();
    grads_.reserve(values_.size());
    for (const Tensor<T>& v : values_) grads_.emplace_back(v.shape());
    grads_[root][0] = T(1);
    for (std::size_t i = pulls_.size(); i-- > 0;) {
      if (pulls_[i]) pulls_[i]();
    }
  }

 private:
  Id push(Tensor<T> value, std::function<void()> pull) {
    values_.push_back(std::move(value));
    pulls_.push_back(std::move(pull));
    return values_.size() - 1;
  }

  void accumulate(Id id, const Tensor<T>& g) {
    Tensor<T>& dst = grads_[id];
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
  }

  std::vector<Tensor<T>> values_;
  std::vector<Tensor<T>> grads_;
  std::vector<std::function<void()>> pulls_;
  bool spent_ = false;
};

}  // namespace ofsr

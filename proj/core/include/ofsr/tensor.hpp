#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ofsr {

/// Dense rank-4 shape in (batch, channels, height, width) order.
struct Shape {
  int b = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(b) * c * h * w;
  }
  bool operator==(const Shape&) const = default;

  std::string str() const {
    return "(" + std::to_string(b) + ", " + std::to_string(c) + ", " +
           std::to_string(h) + ", " + std::to_string(w) + ")";
  }
};

/// Dense rank-4 tensor, row-major in (b, c, h, w). T is float or double.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape s, T fill = T(0)) : shape_(s), data_(s.size(), fill) {
    if (s.b < 0 || s.c < 0 || s.h < 0 || s.w < 0) {
      throw std::invalid_argument("Tensor: negative dimension in " + s.str());
    }
  }

  Tensor(Shape s, std::vector<T> data) : shape_(s), data_(std::move(data)) {
    if (data_.size() != s.size()) {
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(data_.size()) +
                                  " does not match shape " + s.str());
    }
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& at(int b, int c, int y, int x) {
    return data_[index(b, c, y, x)];
  }
  T at(int b, int c, int y, int x) const {
    return data_[index(b, c, y, x)];
  }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  bool all_finite() const {
    for (T v : data_) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<U>(data_[i]);
    }
    return Tensor<U>(shape_, std::move(out));
  }

 private:
  std::size_t index(int b, int c, int y, int x) const {
    return ((static_cast<std::size_t>(b) * shape_.c + c) * shape_.h + y) *
               shape_.w + x;
  }

  Shape shape_{};
  std::vector<T> data_;
};

}  // namespace ofsr

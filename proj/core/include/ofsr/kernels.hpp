#pragma once

// Raw (non-autodiff) compute kernels for the network ops. Convolutions run
// as im2col + BLAS gemm; correctness is pinned against a naive loop
// reference in the test suite.

#include <cblas.h>

#include <algorithm>
#include <string>
#include <vector>

#include "ofsr/tensor.hpp"

namespace ofsr {

/// Weights + bias of one convolution layer. Weight shape is
/// (out_channels, in_channels, k, k); bias is kept as a (1, out_channels,
/// 1, 1) tensor so it can live on the gradient tape like any other value.
template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;
  int kernel = 0;

  ConvLayer() = default;
  ConvLayer(Tensor<T> w, Tensor<T> b) : weight(std::move(w)), bias(std::move(b)) {
    kernel = weight.shape().h;
    if (kernel % 2 == 0 || kernel != weight.shape().w) {
      throw std::invalid_argument("ConvLayer: kernel must be square and odd, got " +
                                  weight.shape().str());
    }
    if (bias.shape() != Shape{1, weight.shape().b, 1, 1}) {
      throw std::invalid_argument("ConvLayer: bias shape " + bias.shape().str() +
                                  " does not match out_channels " +
                                  std::to_string(weight.shape().b));
    }
  }

  int out_channels() const { return weight.shape().b; }
  int in_channels() const { return weight.shape().c; }

  template <typename U>
  ConvLayer<U> cast() const {
    return ConvLayer<U>(weight.template cast<U>(), bias.template cast<U>());
  }
};

namespace detail {

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, float alpha,
                 const float* a, int lda, const float* b, int ldb, float beta,
                 float* c, int ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

inline void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
                 const double* a, int lda, const double* b, int ldb,
                 double beta, double* c, int ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

// Unfold one batch item into a (c*k*k, h*w) column matrix, zero padded.
template <typename T>
void im2col(const Tensor<T>& in, int item, int k, std::vector<T>& col) {
  const Shape& s = in.shape();
  const int pad = (k - 1) / 2;
  const int hw = s.h * s.w;
  col.resize(static_cast<std::size_t>(s.c) * k * k * hw);
  const T* src = in.data() + static_cast<std::size_t>(item) * s.c * hw;
  std::size_t row = 0;
  for (int c = 0; c < s.c; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx, ++row) {
        T* dst = col.data() + row * hw;
        // When the kernel is wider than the image both bounds can leave
        // [0, w]; clamp so the whole row degenerates to padding.
        const int x0 = std::min(s.w, std::max(0, pad - dx));
        const int x1 = std::max(x0, std::min(s.w, s.w + pad - dx));
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + dy - pad;
          T* drow = dst + static_cast<std::size_t>(y) * s.w;
          if (sy < 0 || sy >= s.h) {
            std::fill(drow, drow + s.w, T(0));
            continue;
          }
          const T* srow = src + (static_cast<std::size_t>(c) * s.h + sy) * s.w + dx - pad;
          std::fill(drow, drow + x0, T(0));
          std::copy(srow + x0, srow + x1, drow + x0);
          std::fill(drow + x1, drow + s.w, T(0));
        }
      }
    }
  }
}

// Fold a (c*k*k, h*w) column-gradient matrix back onto one batch item,
// accumulating overlaps.
template <typename T>
void col2im_accum(const std::vector<T>& col, int k, Tensor<T>& grad_in, int item) {
  const Shape& s = grad_in.shape();
  const int pad = (k - 1) / 2;
  const int hw = s.h * s.w;
  T* dst_base = grad_in.data() + static_cast<std::size_t>(item) * s.c * hw;
  std::size_t row = 0;
  for (int c = 0; c < s.c; ++c) {
    for (int dy = 0; dy < k; ++dy) {
      for (int dx = 0; dx < k; ++dx, ++row) {
        const T* src = col.data() + row * hw;
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + dy - pad;
          if (sy < 0 || sy >= s.h) continue;
          const int x0 = std::max(0, pad - dx);
          const int x1 = std::min(s.w, s.w + pad - dx);
          for (int x = x0; x < x1; ++x) {
            dst_base[(static_cast<std::size_t>(c) * s.h + sy) * s.w + x + dx - pad] +=
                src[y * s.w + x];
          }
        }
      }
    }
  }
}

}  // namespace detail

/// Stride-1, same-size zero-padded 2D convolution.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvLayer<T>& layer) {
  const Shape& s = input.shape();
  if (s.c != layer.in_channels()) {
    throw std::invalid_argument(
        "conv2d: input channels " + std::to_string(s.c) +
        " do not match kernel in_channels " +
        std::to_string(layer.in_channels()) + " (input " + s.str() +
        ", weight " + layer.weight.shape().str() + ")");
  }
  const int k = layer.kernel;
  const int oc = layer.out_channels();
  const int hw = s.h * s.w;
  const int ckk = s.c * k * k;
  Tensor<T> out(Shape{s.b, oc, s.h, s.w});
  std::vector<T> col;
  for (int b = 0; b < s.b; ++b) {
    // A 1x1 kernel needs no unfolding: the input plane already is the
    // column matrix.
    const T* cols = layer.kernel == 1
                        ? input.data() + static_cast<std::size_t>(b) * s.c * hw
                        : (detail::im2col(input, b, k, col), col.data());
    detail::gemm(false, false, oc, hw, ckk, T(1), layer.weight.data(), ckk,
                 cols, hw, T(0),
                 out.data() + static_cast<std::size_t>(b) * oc * hw, hw);
  }
  for (int b = 0; b < s.b; ++b) {
    for (int o = 0; o < oc; ++o) {
      T* dst = out.data() + (static_cast<std::size_t>(b) * oc + o) * hw;
      const T bv = layer.bias[o];
      for (int i = 0; i < hw; ++i) dst[i] += bv;
    }
  }
  return out;
}

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& grad_out,
                             const Tensor<T>& saved_input,
                             const ConvLayer<T>& layer) {
  const Shape& s = saved_input.shape();
  const int oc = layer.out_channels();
  if (grad_out.shape() != Shape{s.b, oc, s.h, s.w}) {
    throw std::invalid_argument("conv2d_backward: grad_out shape " +
                                grad_out.shape().str() +
                                " does not match forward output " +
                                Shape{s.b, oc, s.h, s.w}.str());
  }
  const int k = layer.kernel;
  const int hw = s.h * s.w;
  const int ckk = s.c * k * k;

  ConvGrads<T> g{Tensor<T>(s), Tensor<T>(layer.weight.shape()),
                 Tensor<T>(layer.bias.shape())};
  std::vector<T> col;
  std::vector<T> col_grad;
  if (k != 1) col_grad.resize(static_cast<std::size_t>(ckk) * hw);
  for (int b = 0; b < s.b; ++b) {
    const T* go = grad_out.data() + static_cast<std::size_t>(b) * oc * hw;
    // d/dW: accumulate grad_out x col^T over the batch.
    const T* cols = k == 1
                        ? saved_input.data() + static_cast<std::size_t>(b) * s.c * hw
                        : (detail::im2col(saved_input, b, k, col), col.data());
    detail::gemm(false, true, oc, ckk, hw, T(1), go, hw, cols, hw, T(1),
                 g.weight.data(), ckk);
    // d/dinput: W^T x grad_out, folded back with col2im (direct for 1x1).
    T* cg = k == 1 ? g.input.data() + static_cast<std::size_t>(b) * s.c * hw
                   : col_grad.data();
    detail::gemm(true, false, ckk, hw, oc, T(1), layer.weight.data(), ckk, go,
                 hw, T(0), cg, hw);
    if (k != 1) detail::col2im_accum(col_grad, k, g.input, b);
    for (int o = 0; o < oc; ++o) {
      T acc = T(0);
      const T* row = go + static_cast<std::size_t>(o) * hw;
      for (int i = 0; i < hw; ++i) acc += row[i];
      g.bias[o] += acc;
    }
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out[i] = input[i] > T(0) ? input[i] : T(0);
  }
  return out;
}

/// Subgradient at 0 is taken as 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& saved_input) {
  Tensor<T> g(saved_input.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = saved_input[i] > T(0) ? grad_out[i] : T(0);
  }
  return g;
}

template <typename T>
Tensor<T> concat_channels(const std::vector<const Tensor<T>*>& inputs) {
  if (inputs.empty()) {
    throw std::invalid_argument("concat_channels: empty input list");
  }
  const Shape& first = inputs[0]->shape();
  int total_c = 0;
  for (const Tensor<T>* t : inputs) {
    const Shape& s = t->shape();
    if (s.b != first.b || s.h != first.h || s.w != first.w) {
      throw std::invalid_argument("concat_channels: shape " + s.str() +
                                  " incompatible with " + first.str());
    }
    total_c += s.c;
  }
  Tensor<T> out(Shape{first.b, total_c, first.h, first.w});
  const std::size_t plane = static_cast<std::size_t>(first.h) * first.w;
  for (int b = 0; b < first.b; ++b) {
    T* dst = out.data() + static_cast<std::size_t>(b) * total_c * plane;
    for (const Tensor<T>* t : inputs) {
      const int c = t->shape().c;
      const T* src = t->data() + static_cast<std::size_t>(b) * c * plane;
      std::copy(src, src + static_cast<std::size_t>(c) * plane, dst);
      dst += static_cast<std::size_t>(c) * plane;
    }
  }
  return out;
}

/// Backward of concat: slice `channels` channels starting at `offset`.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& t, int offset, int channels) {
  const Shape& s = t.shape();
  if (offset < 0 || offset + channels > s.c) {
    throw std::invalid_argument("slice_channels: [" + std::to_string(offset) +
                                ", " + std::to_string(offset + channels) +
                                ") out of range for " + s.str());
  }
  Tensor<T> out(Shape{s.b, channels, s.h, s.w});
  const std::size_t plane = static_cast<std::size_t>(s.h) * s.w;
  for (int b = 0; b < s.b; ++b) {
    const T* src = t.data() + (static_cast<std::size_t>(b) * s.c + offset) * plane;
    T* dst = out.data() + static_cast<std::size_t>(b) * channels * plane;
    std::copy(src, src + static_cast<std::size_t>(channels) * plane, dst);
  }
  return out;
}

/// Sub-pixel rearrangement: (b, c*r^2, h, w) -> (b, c, r*h, r*w) with
/// channel-major ordering out[b, c, r*y+dy, r*x+dx] = in[b, c*r^2+dy*r+dx, y, x].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, int r) {
  const Shape& s = input.shape();
  if (r < 1 || s.c % (r * r) != 0) {
    throw std::invalid_argument("pixel_shuffle: channels " + std::to_string(s.c) +
                                " not divisible by r^2 with r = " + std::to_string(r));
  }
  const int oc = s.c / (r * r);
  Tensor<T> out(Shape{s.b, oc, s.h * r, s.w * r});
  for (int b = 0; b < s.b; ++b) {
    for (int c = 0; c < oc; ++c) {
      for (int dy = 0; dy < r; ++dy) {
        for (int dx = 0; dx < r; ++dx) {
          const int ic = c * r * r + dy * r + dx;
          for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
              out.at(b, c, r * y + dy, r * x + dx) = input.at(b, ic, y, x);
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, int r) {
  const Shape& s = input.shape();
  if (r < 1 || s.h % r != 0 || s.w % r != 0) {
    throw std::invalid_argument("pixel_unshuffle: spatial size " + s.str() +
                                " not divisible by r = " + std::to_string(r));
  }
  const int h = s.h / r, w = s.w / r;
  Tensor<T> out(Shape{s.b, s.c * r * r, h, w});
  for (int b = 0; b < s.b; ++b) {
    for (int c = 0; c < s.c; ++c) {
      for (int dy = 0; dy < r; ++dy) {
        for (int dx = 0; dx < r; ++dx) {
          const int oc = c * r * r + dy * r + dx;
          for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
              out.at(b, oc, y, x) = input.at(b, c, r * y + dy, r * x + dx);
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("add: shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

}  // namespace ofsr

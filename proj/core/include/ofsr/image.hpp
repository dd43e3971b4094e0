#pragma once

#include <string>
#include <vector>

#include "ofsr/tensor.hpp"

namespace ofsr {

/// RGB image with values in [0, 1], stored planar (channel, row, column).
struct ImageFrame {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 * height * width

  ImageFrame() = default;
  ImageFrame(int w, int h, float fill = 0.0f)
      : width(w), height(h),
        data(static_cast<std::size_t>(3) * w * h, fill) {}

  float& at(int c, int x, int y) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float at(int c, int x, int y) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

/// Catmull-Rom bicubic resampling (a = -0.5), edge-clamped, output clamped
/// to [0, 1]. Align-corners-false sample mapping.
ImageFrame bicubic_resize_image(const ImageFrame& img, double scale);

/// 8-bit RGB PNG, values quantized by round(v * 255).
void write_png(const ImageFrame& img, const std::string& path);
ImageFrame read_png(const std::string& path);

float luminance(const ImageFrame& img, int x, int y);

Tensor<float> image_to_tensor(const ImageFrame& img);

}  // namespace ofsr

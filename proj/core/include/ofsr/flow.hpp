#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ofsr/image.hpp"
#include "ofsr/tensor.hpp"

namespace ofsr {

/// Per-pixel 2-vector displacement field. Components are measured in pixels
/// at the field's own resolution; channel convention is u = horizontal
/// (positive rightward), v = vertical (positive downward).
struct FlowField {
  int width = 0;
  int height = 0;
  std::vector<float> u;
  std::vector<float> v;

  FlowField() = default;
  FlowField(int w, int h)
      : width(w), height(h),
        u(static_cast<std::size_t>(w) * h, 0.0f),
        v(static_cast<std::size_t>(w) * h, 0.0f) {}

  std::size_t size() const { return static_cast<std::size_t>(width) * height; }
  float& u_at(int x, int y) { return u[static_cast<std::size_t>(y) * width + x]; }
  float& v_at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
  float u_at(int x, int y) const { return u[static_cast<std::size_t>(y) * width + x]; }
  float v_at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

struct EpeReport {
  double mean_epe = 0.0;
  int width = 0;
  int height = 0;
  std::vector<double> per_pixel_map;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
};

/// Endpoint error between prediction and ground truth.
EpeReport epe(const FlowField& pred, const FlowField& gt);

/// Bilinear interpolation of both components (align-corners-false sample
/// mapping), with vectors multiplied by `scale` so displacements are
/// expressed in output-resolution pixels.
FlowField bilinear_resize_flow(const FlowField& flow, double scale);

/// Middlebury color-wheel rendering: hue from direction, saturation from
/// magnitude / max_magnitude, zero flow white. When max_magnitude is absent
/// the field's own max magnitude is used (floored at 1e-6).
ImageFrame flow_to_color(const FlowField& flow,
                         std::optional<double> max_magnitude = std::nullopt);

// Tensor bridging ((1, 2, h, w), u in channel 0, v in channel 1).
Tensor<float> flow_to_tensor(const FlowField& flow);
FlowField flow_from_tensor(const Tensor<float>& t, int batch_item = 0);

}  // namespace ofsr

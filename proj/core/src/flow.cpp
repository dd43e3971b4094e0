#include "ofsr/flow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace ofsr {

namespace {

double percentile(std::vector<double> sorted, double p) {
  if (sorted.empty()) return 0.0;
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

// 55-bin Middlebury color wheel (RY 15, YG 6, GC 4, CB 11, BM 13, MR 6).
std::vector<std::array<float, 3>> make_color_wheel() {
  const int RY = 15, YG = 6, GC = 4, CB = 11, BM = 13, MR = 6;
  std::vector<std::array<float, 3>> wheel;
  wheel.reserve(RY + YG + GC + CB + BM + MR);
  for (int i = 0; i < RY; ++i) wheel.push_back({1.0f, float(i) / RY, 0.0f});
  for (int i = 0; i < YG; ++i) wheel.push_back({1.0f - float(i) / YG, 1.0f, 0.0f});
  for (int i = 0; i < GC; ++i) wheel.push_back({0.0f, 1.0f, float(i) / GC});
  for (int i = 0; i < CB; ++i) wheel.push_back({0.0f, 1.0f - float(i) / CB, 1.0f});
  for (int i = 0; i < BM; ++i) wheel.push_back({float(i) / BM, 0.0f, 1.0f});
  for (int i = 0; i < MR; ++i) wheel.push_back({1.0f, 0.0f, 1.0f - float(i) / MR});
  return wheel;
}

float sample_component(const std::vector<float>& comp, int w, int h, double sx,
                       double sy) {
  // Clamp the source position first so fractional coordinates outside the
  // grid replicate the edge pixel instead of blending from a shifted base.
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double v00 = comp[static_cast<std::size_t>(y0) * w + x0];
  const double v01 = comp[static_cast<std::size_t>(y0) * w + x1];
  const double v10 = comp[static_cast<std::size_t>(y1) * w + x0];
  const double v11 = comp[static_cast<std::size_t>(y1) * w + x1];
  return static_cast<float>((1 - fy) * ((1 - fx) * v00 + fx * v01) +
                            fy * ((1 - fx) * v10 + fx * v11));
}

}  // namespace

EpeReport epe(const FlowField& pred, const FlowField& gt) {
  if (pred.width != gt.width || pred.height != gt.height) {
    throw std::invalid_argument(
        "epe: dimension mismatch " + std::to_string(pred.width) + "x" +
        std::to_string(pred.height) + " vs " + std::to_string(gt.width) + "x" +
        std::to_string(gt.height));
  }
  EpeReport r;
  r.width = pred.width;
  r.height = pred.height;
  r.per_pixel_map.resize(pred.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double du = static_cast<double>(pred.u[i]) - gt.u[i];
    const double dv = static_cast<double>(pred.v[i]) - gt.v[i];
    const double d = std::sqrt(du * du + dv * dv);
    r.per_pixel_map[i] = d;
    sum += d;
  }
  r.mean_epe = pred.size() ? sum / static_cast<double>(pred.size()) : 0.0;
  std::vector<double> sorted = r.per_pixel_map;
  std::sort(sorted.begin(), sorted.end());
  r.p50 = percentile(sorted, 50.0);
  r.p90 = percentile(sorted, 90.0);
  r.p99 = percentile(sorted, 99.0);
  return r;
}

FlowField bilinear_resize_flow(const FlowField& flow, double scale) {
  if (!(scale > 0)) {
    throw std::invalid_argument("bilinear_resize_flow: scale must be positive");
  }
  const int ow = static_cast<int>(std::lround(flow.width * scale));
  const int oh = static_cast<int>(std::lround(flow.height * scale));
  if (ow < 1 || oh < 1) {
    throw std::invalid_argument("bilinear_resize_flow: output dimension < 1 at scale " +
                                std::to_string(scale));
  }
  FlowField out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    const double sy = (y + 0.5) / scale - 0.5;
    for (int x = 0; x < ow; ++x) {
      const double sx = (x + 0.5) / scale - 0.5;
      out.u_at(x, y) = static_cast<float>(
          scale * sample_component(flow.u, flow.width, flow.height, sx, sy));
      out.v_at(x, y) = static_cast<float>(
          scale * sample_component(flow.v, flow.width, flow.height, sx, sy));
    }
  }
  return out;
}

ImageFrame flow_to_color(const FlowField& flow, std::optional<double> max_magnitude) {
  static const std::vector<std::array<float, 3>> wheel = make_color_wheel();
  const int ncols = static_cast<int>(wheel.size());

  double maxrad = max_magnitude.value_or(0.0);
  if (!max_magnitude) {
    for (std::size_t i = 0; i < flow.size(); ++i) {
      maxrad = std::max(maxrad, std::sqrt(static_cast<double>(flow.u[i]) * flow.u[i] +
                                          static_cast<double>(flow.v[i]) * flow.v[i]));
    }
  }
  maxrad = std::max(maxrad, 1e-6);

  ImageFrame img(flow.width, flow.height);
  for (int y = 0; y < flow.height; ++y) {
    for (int x = 0; x < flow.width; ++x) {
      const double fu = flow.u_at(x, y) / maxrad;
      const double fv = flow.v_at(x, y) / maxrad;
      const double rad = std::min(std::sqrt(fu * fu + fv * fv), 1.0);
      const double a = std::atan2(-fv, -fu) / M_PI;  // [-1, 1]
      const double fk = (a + 1.0) / 2.0 * (ncols - 1);
      const int k0 = static_cast<int>(std::floor(fk)) % ncols;
      const int k1 = (k0 + 1) % ncols;
      const double f = fk - std::floor(fk);
      for (int c = 0; c < 3; ++c) {
        const double col = (1 - f) * wheel[k0][c] + f * wheel[k1][c];
        img.at(c, x, y) = static_cast<float>(1.0 - rad * (1.0 - col));
      }
    }
  }
  return img;
}

Tensor<float> flow_to_tensor(const FlowField& flow) {
  Tensor<float> t(Shape{1, 2, flow.height, flow.width});
  std::copy(flow.u.begin(), flow.u.end(), t.data());
  std::copy(flow.v.begin(), flow.v.end(), t.data() + flow.size());
  return t;
}

FlowField flow_from_tensor(const Tensor<float>& t, int batch_item) {
  const Shape& s = t.shape();
  if (s.c != 2 || batch_item < 0 || batch_item >= s.b) {
    throw std::invalid_argument("flow_from_tensor: need 2 channels and a valid batch item, got " +
                                s.str());
  }
  FlowField f(s.w, s.h);
  const std::size_t plane = f.size();
  const float* base = t.data() + static_cast<std::size_t>(batch_item) * 2 * plane;
  std::copy(base, base + plane, f.u.begin());
  std::copy(base + plane, base + 2 * plane, f.v.begin());
  return f;
}

}  // namespace ofsr

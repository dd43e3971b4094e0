#include "ofsr/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include "ofsr/errors.hpp"

namespace ofsr {

namespace {

// Catmull-Rom (bicubic with a = -0.5).
double cubic_weight(double t) {
  constexpr double a = -0.5;
  t = std::fabs(t);
  if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * a;
  return 0.0;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

ImageFrame bicubic_resize_image(const ImageFrame& img, double scale) {
  if (!(scale > 0)) {
    throw std::invalid_argument("bicubic_resize_image: scale must be positive");
  }
  const int ow = static_cast<int>(std::lround(img.width * scale));
  const int oh = static_cast<int>(std::lround(img.height * scale));
  if (ow < 1 || oh < 1) {
    throw std::invalid_argument("bicubic_resize_image: output dimension < 1 at scale " +
                                std::to_string(scale));
  }
  ImageFrame out(ow, oh);
  for (int y = 0; y < oh; ++y) {
    const double sy = (y + 0.5) / scale - 0.5;
    const int iy = static_cast<int>(std::floor(sy));
    double wy[4];
    for (int j = 0; j < 4; ++j) wy[j] = cubic_weight(sy - (iy - 1 + j));
    for (int x = 0; x < ow; ++x) {
      const double sx = (x + 0.5) / scale - 0.5;
      const int ix = static_cast<int>(std::floor(sx));
      double wx[4];
      for (int i = 0; i < 4; ++i) wx[i] = cubic_weight(sx - (ix - 1 + i));
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int j = 0; j < 4; ++j) {
          const int py = std::clamp(iy - 1 + j, 0, img.height - 1);
          double rowacc = 0.0;
          for (int i = 0; i < 4; ++i) {
            const int px = std::clamp(ix - 1 + i, 0, img.width - 1);
            rowacc += wx[i] * img.at(c, px, py);
          }
          acc += wy[j] * rowacc;
        }
        out.at(c, x, y) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
      }
    }
  }
  return out;
}

void write_png(const ImageFrame& img, const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) {
    throw data_error("write_png: cannot open " + path + " for writing");
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw data_error("write_png: libpng failure writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(img.at(c, x, y), 0.0f, 1.0f);
        row[3 * x + c] = static_cast<png_byte>(std::lround(v * 255.0f));
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageFrame read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) {
    throw data_error("read_png: cannot open " + path);
  }
  png_byte header[8];
  if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8)) {
    throw data_error("read_png: " + path + " is not a PNG file");
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw data_error("read_png: libpng failure reading " + path);
  }
  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  // Normalize whatever we are handed to 8-bit RGB.
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_palette_to_rgb(png);
  png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY ||
      png_get_color_type(png, info) == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  ImageFrame img(w, h);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.at(c, x, y) = row[3 * x + c] / 255.0f;
      }
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

float luminance(const ImageFrame& img, int x, int y) {
  return 0.299f * img.at(0, x, y) + 0.587f * img.at(1, x, y) +
         0.114f * img.at(2, x, y);
}

Tensor<float> image_to_tensor(const ImageFrame& img) {
  Tensor<float> t(Shape{1, 3, img.height, img.width});
  std::copy(img.data.begin(), img.data.end(), t.data());
  return t;
}

}  // namespace ofsr

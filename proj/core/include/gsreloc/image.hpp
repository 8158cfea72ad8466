#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gsreloc/errors.hpp"

namespace gsreloc {

// Row-major H x W x C buffer of doubles.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<double> data;

  ImageBuffer() = default;
  ImageBuffer(int w, int h, int c)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, 0.0) {}

  double& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const ImageBuffer& other) const {
    return width == other.width && height == other.height && channels == other.channels;
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

// 8-bit PNG (grayscale or RGB); values clamped to [0, 1].
void write_png(const ImageBuffer& image, const std::string& path);

// Flat binary float32 grid: 16-byte header {magic "FGRD", u32 height,
// u32 width, u32 channels}, little-endian, then row-major float32 data.
void write_float_grid(const ImageBuffer& image, const std::string& path);
ImageBuffer read_float_grid(const std::string& path);

// Same container reused for flat vectors (H=1).
void write_float_vector(const std::vector<double>& values, const std::string& path);
std::vector<double> read_float_vector(const std::string& path);

}  // namespace gsreloc

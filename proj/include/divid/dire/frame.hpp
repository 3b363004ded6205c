#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "divid/core/error.hpp"
#include "divid/core/tensor.hpp"

namespace divid::dire {

// A decoded video frame, HWC, RGB channel order, values on the [0, max_value] scale.
struct RawFrame {
  int width = 0;
  int height = 0;
  int channels = 3;
  float max_value = 255.0f;
  std::vector<float> pixels;
  int frame_index = 0;

  bool decoded() const {
    return width > 0 && height > 0 && channels > 0 &&
           pixels.size() == static_cast<std::size_t>(width) * height * channels;
  }

  float at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

// One preprocessed frame: H x W x C pixels in [-1, 1] at model resolution.
struct FrameTensor {
  Tensor pixels;
  int source_width = 0;
  int source_height = 0;
  int frame_index = 0;

  int height() const { return static_cast<int>(pixels.dim(0)); }
  int width() const { return static_cast<int>(pixels.dim(1)); }
  int channels() const { return static_cast<int>(pixels.dim(2)); }
};

struct Resolution {
  int height = 0;
  int width = 0;
};

// Center-crop to the largest centred square, bilinear resize (half-pixel centres, edge clamped)
// to `target`, then map [0, max_value] onto [-1, 1].
inline FrameTensor preprocess_frame(const RawFrame& raw, Resolution target) {
  if (!raw.decoded()) throw FrameError(ErrorKind::data, raw.frame_index, "frame could not be decoded");
  if (target.height <= 0 || target.width <= 0) throw UsageError("target resolution must be positive");

  const int side = std::min(raw.width, raw.height);
  const int x_off = (raw.width - side) / 2;
  const int y_off = (raw.height - side) / 2;
  const int C = raw.channels;

  Tensor out(Shape{static_cast<std::size_t>(target.height), static_cast<std::size_t>(target.width),
                   static_cast<std::size_t>(C)});
  const double sy = static_cast<double>(side) / target.height;
  const double sx = static_cast<double>(side) / target.width;

  for (int y = 0; y < target.height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(side - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, side - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target.width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(side - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, side - 1);
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const double v00 = raw.at(y_off + y0, x_off + x0, c);
        const double v01 = raw.at(y_off + y0, x_off + x1, c);
        const double v10 = raw.at(y_off + y1, x_off + x0, c);
        const double v11 = raw.at(y_off + y1, x_off + x1, c);
        const double v = (1 - wy) * ((1 - wx) * v00 + wx * v01) + wy * ((1 - wx) * v10 + wx * v11);
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), static_cast<std::size_t>(c)) =
            static_cast<float>(std::clamp(v / raw.max_value * 2.0 - 1.0, -1.0, 1.0));
      }
    }
  }
  return FrameTensor{std::move(out), raw.width, raw.height, raw.frame_index};
}

// Inverse of the value mapping: [-1, 1] floats back to a [0, 255] raw frame (no geometry change).
inline RawFrame to_raw_frame(const Tensor& pixels, int frame_index = 0) {
  RawFrame raw;
  raw.height = static_cast<int>(pixels.dim(0));
  raw.width = static_cast<int>(pixels.dim(1));
  raw.channels = static_cast<int>(pixels.dim(2));
  raw.frame_index = frame_index;
  raw.pixels.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    raw.pixels[i] = std::round(std::clamp((pixels[i] + 1.0f) * 127.5f, 0.0f, 255.0f));
  }
  return raw;
}

}  // namespace divid::dire

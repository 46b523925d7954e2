#pragma once

#include <cstdint>
#include <vector>

namespace tdet {

// 8-bit raster, interleaved channels, row-major (y, x, c).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;  // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, int c, std::uint8_t fill = 0);

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  std::uint8_t& at(int x, int y, int c) { return data[index(x, y, c)]; }
  std::uint8_t at(int x, int y, int c) const { return data[index(x, y, c)]; }

  // Throws std::invalid_argument when dims/channels/data length disagree.
  void validate() const;
  friend bool operator==(const Image&, const Image&) = default;
};

// Working copy with samples in [0, 1], same layout as Image.
struct FloatImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h, int c, float fill = 0.0f);

  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  float& at(int x, int y, int c) { return data[index(x, y, c)]; }
  float at(int x, int y, int c) const { return data[index(x, y, c)]; }
};

FloatImage to_float(const Image& img);
// Clamps to [0, 1] and rounds to the nearest of 256 levels.
Image quantize(const FloatImage& img);

}  // namespace tdet

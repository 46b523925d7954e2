#include "tdet/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdet {

Image::Image(int w, int h, int c, std::uint8_t fill)
    : width(w), height(h), channels(c),
      data(static_cast<std::size_t>(w) * h * c, fill) {
  validate();
}

void Image::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dims must be positive");
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("image channels must be 1 or 3, got " + std::to_string(channels));
  }
  if (data.size() != static_cast<std::size_t>(width) * height * channels) {
    throw std::invalid_argument("image data length does not match dims");
  }
}

FloatImage::FloatImage(int w, int h, int c, float fill)
    : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

FloatImage to_float(const Image& img) {
  FloatImage out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
  }
  return out;
}

Image quantize(const FloatImage& img) {
  Image out(img.width, img.height, img.channels);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const float v = std::clamp(img.data[i], 0.0f, 1.0f);
    out.data[i] = static_cast<std::uint8_t>(std::floor(v * 255.0f + 0.5f));
  }
  return out;
}

}  // namespace tdet

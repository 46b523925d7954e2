#include "tdet/overlay.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace tdet {

namespace {

// Rows of 3-bit masks, MSB = leftmost column.
constexpr std::array<std::array<std::uint8_t, 5>, 10> kDigits{{
    {7, 5, 5, 5, 7},
    {2, 6, 2, 2, 7},
    {7, 1, 7, 4, 7},
    {7, 1, 7, 1, 7},
    {5, 5, 7, 1, 1},
    {7, 4, 7, 1, 7},
    {7, 4, 7, 5, 7},
    {7, 1, 1, 1, 1},
    {7, 5, 7, 5, 7},
    {7, 5, 7, 1, 7},
}};

constexpr std::array<std::array<std::uint8_t, 3>, 6> kPalette{{
    {255, 48, 48},
    {48, 255, 48},
    {64, 128, 255},
    {255, 255, 0},
    {255, 0, 255},
    {0, 255, 255},
}};

void put(Image& img, int x, int y, const std::array<std::uint8_t, 3>& colour) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  for (int c = 0; c < 3; ++c) img.at(x, y, c) = colour[static_cast<std::size_t>(c)];
}

}  // namespace

Image render_overlay(const Image& image, const std::vector<Detection>& dets) {
  image.validate();
  Image out(image.width, image.height, 3);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        out.at(x, y, c) = image.at(x, y, image.channels == 3 ? c : 0);
      }
    }
  }
  for (const Detection& d : dets) {
    const auto& colour = kPalette[static_cast<std::size_t>(std::abs(d.class_id)) % kPalette.size()];
    const int x0 = static_cast<int>(std::floor(d.box.xmin));
    const int y0 = static_cast<int>(std::floor(d.box.ymin));
    const int x1 = static_cast<int>(std::ceil(d.box.xmax)) - 1;
    const int y1 = static_cast<int>(std::ceil(d.box.ymax)) - 1;
    for (int x = x0; x <= x1; ++x) {
      put(out, x, y0, colour);
      put(out, x, y1, colour);
    }
    for (int y = y0; y <= y1; ++y) {
      put(out, x0, y, colour);
      put(out, x1, y, colour);
    }
    const std::string label = std::to_string(d.class_id);
    int cursor = x0 + 2;
    for (const char ch : label) {
      if (ch < '0' || ch > '9') continue;
      const auto& glyph = kDigits[static_cast<std::size_t>(ch - '0')];
      for (int row = 0; row < 5; ++row) {
        for (int col = 0; col < 3; ++col) {
          if ((glyph[static_cast<std::size_t>(row)] >> (2 - col)) & 1) {
            put(out, cursor + col, y0 + 2 + row, colour);
          }
        }
      }
      cursor += 4;
    }
  }
  return out;
}

}  // namespace tdet

#include "tdet/toy.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <stdexcept>

#include "tdet/rng.hpp"

namespace tdet::toy {

namespace {

constexpr int kPlacementAttempts = 50;

bool inside(ShapeClass shape, double px, double py, double x0, double y0, double s) {
  switch (shape) {
    case kSquare:
      return px >= x0 && px < x0 + s && py >= y0 && py < y0 + s;
    case kDisk: {
      const double r = 0.5 * s;
      const double dx = px - (x0 + r);
      const double dy = py - (y0 + r);
      return dx * dx + dy * dy <= r * r;
    }
    case kTriangle: {
      // Apex at top centre, base along the bottom edge.
      if (py < y0 || py > y0 + s) return false;
      const double half = 0.5 * (py - y0);
      const double cx = x0 + 0.5 * s;
      return px >= cx - half && px <= cx + half;
    }
  }
  return false;
}

bool overlaps(const Box& a, const Box& b) {
  // One pixel of clearance between shapes.
  return a.xmin < b.xmax + 1 && b.xmin < a.xmax + 1 && a.ymin < b.ymax + 1 && b.ymin < a.ymax + 1;
}

}  // namespace

const std::vector<std::string>& class_names() {
  static const std::vector<std::string> names{"square", "disk", "triangle"};
  return names;
}

DatasetImage render_toy_image(std::uint64_t seed, int size, std::string file) {
  if (size < kMaxShapeSize) throw std::invalid_argument("render_toy_image: image too small");
  Rng rng(seed);
  DatasetImage out{std::move(file), Image(size, size, 3), {}};
  for (auto& v : out.image.data) v = static_cast<std::uint8_t>(rng.below(kBackgroundMax + 1));

  const int objects = 1 + static_cast<int>(rng.below(kMaxObjects));
  for (int o = 0; o < objects; ++o) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      const auto shape = static_cast<ShapeClass>(rng.below(3));
      const int s = kMinShapeSize + static_cast<int>(rng.below(kMaxShapeSize - kMinShapeSize + 1));
      const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - s + 1)));
      const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(size - s + 1)));
      std::array<std::uint8_t, 3> colour{};
      for (auto& c : colour) {
        c = static_cast<std::uint8_t>(kObjectMin + rng.below(256 - kObjectMin));
      }
      const Box frame{static_cast<float>(x0), static_cast<float>(y0), static_cast<float>(x0 + s),
                      static_cast<float>(y0 + s)};
      const bool clash = std::any_of(out.boxes.begin(), out.boxes.end(),
                                     [&](const BoxAnnotation& b) { return overlaps(b.box, frame); });
      if (clash) continue;
      int xmin = size, ymin = size, xmax = -1, ymax = -1;
      for (int y = y0; y < y0 + s; ++y) {
        for (int x = x0; x < x0 + s; ++x) {
          if (!inside(shape, x + 0.5, y + 0.5, x0, y0, s)) continue;
          for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = colour[static_cast<std::size_t>(c)];
          xmin = std::min(xmin, x);
          ymin = std::min(ymin, y);
          xmax = std::max(xmax, x);
          ymax = std::max(ymax, y);
        }
      }
      out.boxes.push_back({shape, Box{static_cast<float>(xmin), static_cast<float>(ymin),
                                      static_cast<float>(xmax + 1), static_cast<float>(ymax + 1)}});
      break;
    }
  }
  return out;
}

std::vector<DatasetImage> make_toy_split(std::uint64_t seed, int count, int size) {
  std::vector<DatasetImage> images;
  images.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%04d.ppm", i);
    images.push_back(render_toy_image(derive_seed(seed, static_cast<std::uint64_t>(i)), size, name));
  }
  return images;
}

}  // namespace tdet::toy

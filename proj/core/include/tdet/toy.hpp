#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdet/dataset.hpp"

namespace tdet::toy {

// Class ids of the procedural shapes.
enum ShapeClass : int { kSquare = 0, kDisk = 1, kTriangle = 2 };

inline constexpr int kMinShapeSize = 12;
inline constexpr int kMaxShapeSize = 32;
inline constexpr int kMaxObjects = 3;
inline constexpr int kBackgroundMax = 110;  // background noise in [0, 110]
inline constexpr int kObjectMin = 120;      // object colour channels in [120, 255]

const std::vector<std::string>& class_names();

// One RGB image of side `size`: uniform-noise background and 1-3 filled,
// non-overlapping shapes. A pixel belongs to a shape when its centre does;
// each box is the exact hull of its shape's pixels.
DatasetImage render_toy_image(std::uint64_t seed, int size, std::string file);

// `count` images named 0000.ppm, 0001.ppm, ...; image i uses derive_seed(seed, i).
std::vector<DatasetImage> make_toy_split(std::uint64_t seed, int count, int size);

// Split seeds used by gen-toy.
inline constexpr std::uint64_t kTrainStream = 1;
inline constexpr std::uint64_t kTestStream = 2;

}  // namespace tdet::toy

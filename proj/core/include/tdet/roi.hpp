#pragma once

#include <vector>

#include "tdet/boxes.hpp"
#include "tdet/tensor.hpp"

namespace tdet {

// Pyramid level for a RoI of size s = sqrt(w*h):
// clamp(floor(canonical_level + log2(s / canonical_size)), min_level, max_level).
struct RoiLevelRule {
  int canonical_level = 1;
  float canonical_size = 32.0f;
  int min_level = 0;
  int max_level = 2;
};

int roi_level(const Box& roi, const RoiLevelRule& rule);

// Align-style extraction: the roi is split into out_size x out_size cells and
// each cell takes the bilinear sample (zero exterior) at its centre on the
// assigned level. Feature cell i of a stride-s level is centred on image
// coordinate (i + 0.5) * s. Levels are (1, C, H, W); output is
// (1, C, out_size, out_size).
template <std::floating_point T>
BasicTensor<T> roi_extract(const std::vector<BasicTensor<T>>& levels,
                           const std::vector<int>& strides, const Box& roi, int out_size,
                           const RoiLevelRule& rule);

// Accumulates the adjoint of roi_extract into grad_levels (same shapes as levels).
template <std::floating_point T>
void roi_extract_backward(const std::vector<int>& strides, const Box& roi, int out_size,
                          const RoiLevelRule& rule, const BasicTensor<T>& upstream,
                          std::vector<BasicTensor<T>>& grad_levels);

}  // namespace tdet

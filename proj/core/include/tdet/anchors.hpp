#pragma once

#include <cstdint>
#include <vector>

#include "tdet/boxes.hpp"

namespace tdet {

struct Anchor {
  float cx = 0.0f;
  float cy = 0.0f;
  float width = 0.0f;
  float height = 0.0f;
  int level = 0;

  Box box() const {
    return {cx - 0.5f * width, cy - 0.5f * height, cx + 0.5f * width, cy + 0.5f * height};
  }
};

// One feature-map grid the anchors tile. Several scales on one level give the
// single-scale (no pyramid) layout.
struct AnchorLevel {
  int stride = 0;
  std::vector<float> scales;  // base side lengths; anchor area = scale^2
  int grid_h = 0;
  int grid_w = 0;
};

// Order: level, row, column, scale, ratio. Aspect w/h = ratio; count is
// sum over levels of grid_h * grid_w * |scales| * |ratios|.
std::vector<Anchor> generate_anchors(const std::vector<AnchorLevel>& levels,
                                     const std::vector<float>& ratios);

enum class AnchorLabel : std::int8_t { negative = 0, positive = 1, ignore = -1 };

struct MatchResult {
  std::vector<AnchorLabel> labels;
  std::vector<int> matched_gt;      // best-IoU gt per anchor, -1 when there is none
  std::vector<float> max_iou;       // best IoU per anchor
  std::vector<BoxDelta> targets;    // valid where labels[i] == positive

  std::size_t count(AnchorLabel label) const;
};

// Positive: IoU >= pos_iou with some gt, or the first anchor reaching a gt's
// best IoU (when that IoU is > 0). Negative: max IoU < neg_iou. Otherwise
// ignore. Ties between gts resolve to the lowest gt index.
MatchResult match_anchors(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                          float pos_iou, float neg_iou);

}  // namespace tdet

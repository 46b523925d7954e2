#pragma once

#include <cstddef>
#include <vector>

#include "tdet/boxes.hpp"

namespace tdet {

struct Detection {
  Box box;
  int class_id = 0;
  float score = 0.0f;
};

// Greedy per-class suppression: a detection is dropped when its IoU with an
// already kept detection of the same class exceeds iou_thresh. Returned
// indices are ordered by score descending, ties by lower input index.
std::vector<std::size_t> nms(const std::vector<Detection>& dets, float iou_thresh);

// Indices of `scores` sorted descending, ties by lower index.
std::vector<std::size_t> order_by_score(const std::vector<float>& scores);

}  // namespace tdet

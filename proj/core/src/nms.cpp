#include "tdet/nms.hpp"

#include <algorithm>
#include <numeric>

namespace tdet {

std::vector<std::size_t> order_by_score(const std::vector<float>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<std::size_t> nms(const std::vector<Detection>& dets, float iou_thresh) {
  std::vector<float> scores(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) scores[i] = dets[i].score;
  const std::vector<std::size_t> order = order_by_score(scores);

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const Detection& d = dets[idx];
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return dets[k].class_id == d.class_id && iou(dets[k].box, d.box) > iou_thresh;
    });
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

}  // namespace tdet

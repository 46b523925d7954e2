#include "tdet/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdet {

std::vector<Anchor> generate_anchors(const std::vector<AnchorLevel>& levels,
                                     const std::vector<float>& ratios) {
  if (ratios.empty()) throw std::invalid_argument("generate_anchors: ratios must be nonempty");
  for (std::size_t l = 1; l < levels.size(); ++l) {
    if (levels[l].stride < levels[l - 1].stride) {
      throw std::invalid_argument("generate_anchors: strides must be ascending");
    }
  }
  std::vector<Anchor> anchors;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const AnchorLevel& level = levels[l];
    for (int y = 0; y < level.grid_h; ++y) {
      for (int x = 0; x < level.grid_w; ++x) {
        const float cx = (static_cast<float>(x) + 0.5f) * static_cast<float>(level.stride);
        const float cy = (static_cast<float>(y) + 0.5f) * static_cast<float>(level.stride);
        for (float scale : level.scales) {
          for (float ratio : ratios) {
            const double root = std::sqrt(static_cast<double>(ratio));
            anchors.push_back({cx, cy, static_cast<float>(scale * root),
                               static_cast<float>(scale / root), static_cast<int>(l)});
          }
        }
      }
    }
  }
  return anchors;
}

std::size_t MatchResult::count(AnchorLabel label) const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), label));
}

MatchResult match_anchors(const std::vector<Box>& anchors, const std::vector<Box>& gts,
                          float pos_iou, float neg_iou) {
  if (!(pos_iou > neg_iou)) {
    throw std::invalid_argument("match_anchors: pos_iou must exceed neg_iou");
  }
  const std::size_t n = anchors.size();
  MatchResult m;
  m.labels.assign(n, AnchorLabel::negative);
  m.matched_gt.assign(n, -1);
  m.max_iou.assign(n, 0.0f);
  m.targets.assign(n, BoxDelta{0.0f, 0.0f, 0.0f, 0.0f});
  if (gts.empty()) return m;

  std::vector<float> gt_best(gts.size(), 0.0f);
  std::vector<int> gt_best_anchor(gts.size(), -1);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const float v = iou(anchors[a], gts[g]);
      if (v > m.max_iou[a]) {
        m.max_iou[a] = v;
        m.matched_gt[a] = static_cast<int>(g);
      }
      if (v > gt_best[g]) {
        gt_best[g] = v;
        gt_best_anchor[g] = static_cast<int>(a);
      }
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (m.max_iou[a] >= pos_iou) {
      m.labels[a] = AnchorLabel::positive;
    } else if (m.max_iou[a] < neg_iou) {
      m.labels[a] = AnchorLabel::negative;
    } else {
      m.labels[a] = AnchorLabel::ignore;
    }
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (gt_best_anchor[g] >= 0) m.labels[static_cast<std::size_t>(gt_best_anchor[g])] = AnchorLabel::positive;
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (m.labels[a] == AnchorLabel::positive) {
      m.targets[a] = encode_box(anchors[a], gts[static_cast<std::size_t>(m.matched_gt[a])]);
    }
  }
  return m;
}

}  // namespace tdet

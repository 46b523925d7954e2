#include "tdet/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tdet/activations.hpp"
#include "tdet/roi.hpp"

namespace tdet {

AnchorSite anchor_site(const model::ModelConfig& config, int image_h, int image_w,
                       std::size_t index) {
  const auto slots = static_cast<std::size_t>(config.anchors_per_location());
  const std::vector<AnchorLevel> levels = config.anchor_levels(image_h, image_w);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto w = static_cast<std::size_t>(levels[l].grid_w);
    const std::size_t count = static_cast<std::size_t>(levels[l].grid_h) * w * slots;
    if (index < count) {
      const std::size_t cell = index / slots;
      return {static_cast<int>(l), static_cast<int>(index % slots), static_cast<int>(cell / w),
              static_cast<int>(cell % w)};
    }
    index -= count;
  }
  throw std::out_of_range("anchor_site: index past last anchor");
}

AnchorScores gather_rpn(const model::ModelConfig& config,
                        const std::vector<model::RpnLevelOutput>& outputs, int image_h,
                        int image_w) {
  const std::vector<AnchorLevel> levels = config.anchor_levels(image_h, image_w);
  if (outputs.size() != levels.size()) throw ShapeError("gather_rpn: level count mismatch");
  AnchorScores s;
  s.anchors = generate_anchors(levels, config.ratios);
  s.logits.reserve(s.anchors.size());
  s.deltas.reserve(s.anchors.size());
  const int slots = config.anchors_per_location();
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const Tensor& obj = outputs[l].objectness;
    const Tensor& reg = outputs[l].deltas;
    if (obj.shape() != Shape4{1, slots, levels[l].grid_h, levels[l].grid_w}) {
      throw ShapeError("gather_rpn: objectness shape " + to_string(obj.shape()));
    }
    for (int y = 0; y < levels[l].grid_h; ++y) {
      for (int x = 0; x < levels[l].grid_w; ++x) {
        for (int a = 0; a < slots; ++a) {
          s.logits.push_back(obj.at(0, a, y, x));
          s.deltas.push_back({reg.at(0, 4 * a, y, x), reg.at(0, 4 * a + 1, y, x),
                              reg.at(0, 4 * a + 2, y, x), reg.at(0, 4 * a + 3, y, x)});
        }
      }
    }
  }
  return s;
}

std::vector<Box> propose(const AnchorScores& scores, int image_h, int image_w,
                         const ProposalConfig& config) {
  const auto w = static_cast<float>(image_w);
  const auto h = static_cast<float>(image_h);
  std::vector<Detection> candidates;
  for (const std::size_t i : order_by_score(scores.logits)) {
    if (candidates.size() >= static_cast<std::size_t>(config.pre_nms)) break;
    if (!std::isfinite(scores.logits[i])) continue;
    const Box b = clip_box(decode_box(scores.anchors[i].box(), scores.deltas[i]), w, h);
    if (!(b.width() >= config.min_size && b.height() >= config.min_size)) continue;
    candidates.push_back({b, 0, sigmoid(scores.logits[i])});
  }
  std::vector<Box> out;
  for (const std::size_t i : nms(candidates, config.nms_iou)) {
    if (out.size() >= static_cast<std::size_t>(config.post_nms)) break;
    out.push_back(candidates[i].box);
  }
  return out;
}

Tensor stack_roi_features(const model::ModelConfig& config,
                          const model::PyramidFeatures& pyramid, const std::vector<Box>& rois) {
  const int size = config.roi_size;
  Tensor out(Shape4{static_cast<int>(rois.size()), config.pyramid_width, size, size});
  const std::size_t per_roi = out.shape().numel() / std::max<std::size_t>(rois.size(), 1);
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const Tensor f = roi_extract(pyramid.levels, pyramid.strides, rois[r], size, config.roi_rule());
    std::copy(f.data().begin(), f.data().end(), out.data().begin() + r * per_roi);
  }
  return out;
}

std::vector<Detection> detect_image(const model::Detector& detector, const Image& image,
                                    const DetectConfig& config, const ProposalConfig& proposals) {
  const model::ModelConfig& mc = detector.config();
  const Tensor input = model::image_to_tensor(image);
  const model::PyramidFeatures pyramid =
      detector.fpn_forward(detector.backbone_forward(input));
  const auto outputs = detector.rpn_forward(pyramid);
  const AnchorScores scores = gather_rpn(mc, outputs, image.height, image.width);
  const std::vector<Box> rois = propose(scores, image.height, image.width, proposals);
  if (rois.empty()) return {};
  const model::HeadOutput head = detector.head_forward(stack_roi_features(mc, pyramid, rois));

  const int classes = mc.num_classes + 1;
  const auto w = static_cast<float>(image.width);
  const auto h = static_cast<float>(image.height);
  std::vector<Detection> candidates;
  for (std::size_t r = 0; r < rois.size(); ++r) {
    for (int c = 1; c < classes; ++c) {
      const float score = head.probs[r * classes + static_cast<std::size_t>(c)];
      if (!(score >= config.score_thresh)) continue;
      const float* d = head.deltas.data() + r * 4 * mc.num_classes + 4 * (c - 1);
      const Box b = clip_box(decode_box(rois[r], {d[0], d[1], d[2], d[3]}), w, h);
      if (!b.valid()) continue;
      candidates.push_back({b, c - 1, score});
    }
  }
  std::vector<Detection> out;
  for (const std::size_t i : nms(candidates, config.nms_iou)) {
    if (out.size() >= static_cast<std::size_t>(config.max_dets)) break;
    out.push_back(candidates[i]);
  }
  return out;
}

}  // namespace tdet

#pragma once

#include <vector>

#include "tdet/anchors.hpp"
#include "tdet/config.hpp"
#include "tdet/image.hpp"
#include "tdet/model.hpp"
#include "tdet/nms.hpp"

namespace tdet {

struct ProposalConfig {
  int pre_nms = 300;
  float nms_iou = 0.7f;
  int post_nms = 50;
  float min_size = 1.0f;  // proposals narrower or shorter than this are dropped
};

// RPN outputs gathered per anchor, in generate_anchors order.
struct AnchorScores {
  std::vector<Anchor> anchors;
  std::vector<float> logits;
  std::vector<BoxDelta> deltas;
};

AnchorScores gather_rpn(const model::ModelConfig& config,
                        const std::vector<model::RpnLevelOutput>& outputs, int image_h,
                        int image_w);

// Channel a of level l holds anchor slot a; returns (level, channel, y, x)
// for a flat anchor index.
struct AnchorSite {
  int level = 0;
  int slot = 0;
  int y = 0;
  int x = 0;
};
AnchorSite anchor_site(const model::ModelConfig& config, int image_h, int image_w,
                       std::size_t index);

// Decoded, clipped anchors ranked by objectness: top pre_nms, NMS, top post_nms.
std::vector<Box> propose(const AnchorScores& scores, int image_h, int image_w,
                         const ProposalConfig& config);

// (N, width, roi_size, roi_size) stack of roi_extract over the pyramid.
Tensor stack_roi_features(const model::ModelConfig& config,
                          const model::PyramidFeatures& pyramid, const std::vector<Box>& rois);

// Full inference: proposals, head, per-class NMS, score threshold and
// top-k. Class ids are 0-based dataset ids; boxes are clipped to the image.
std::vector<Detection> detect_image(const model::Detector& detector, const Image& image,
                                    const DetectConfig& config,
                                    const ProposalConfig& proposals = {});

}  // namespace tdet

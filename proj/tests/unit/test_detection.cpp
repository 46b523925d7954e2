#include <gtest/gtest.h>

#include <cmath>

#include "../oracles.hpp"
#include "tdet/anchors.hpp"
#include "tdet/boxes.hpp"
#include "tdet/nms.hpp"
#include "tdet/rng.hpp"
#include "tdet/roi.hpp"

using namespace tdet;

namespace {

Box random_box(Rng& rng, float extent, bool integer) {
  float x0 = static_cast<float>(rng.uniform(0, extent - 4));
  float y0 = static_cast<float>(rng.uniform(0, extent - 4));
  float w = static_cast<float>(rng.uniform(2, extent / 3));
  float h = static_cast<float>(rng.uniform(2, extent / 3));
  if (integer) {
    x0 = std::floor(x0);
    y0 = std::floor(y0);
    w = std::ceil(w);
    h = std::ceil(h);
  }
  return {x0, y0, x0 + w, y0 + h};
}

std::vector<Box> boxes_of(const std::vector<Anchor>& anchors) {
  std::vector<Box> out;
  for (const Anchor& a : anchors) out.push_back(a.box());
  return out;
}

}  // namespace

TEST(Anchors, CountAndOrder) {
  const std::vector<AnchorLevel> levels{{4, {16}, 16, 16}, {8, {32}, 8, 8}, {16, {64}, 4, 4}};
  const auto anchors = generate_anchors(levels, {0.5f, 1.0f, 2.0f});
  ASSERT_EQ(anchors.size(), 3u * (256 + 64 + 16));
  EXPECT_EQ(anchors.front().level, 0);
  EXPECT_EQ(anchors.back().level, 2);
  // level 0, row 0, column 1, ratio index 2
  const Anchor& a = anchors[3 + 2];
  EXPECT_FLOAT_EQ(a.cx, 6.0f);
  EXPECT_FLOAT_EQ(a.cy, 2.0f);
  EXPECT_NEAR(a.width / a.height, 2.0f, 1e-5);
}

TEST(Anchors, AreaIsScaleSquaredForEveryRatio) {
  const auto anchors = generate_anchors({{16, {16, 32, 64}, 4, 4}}, {0.5f, 1.0f, 2.0f});
  ASSERT_EQ(anchors.size(), 16u * 9u);
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const float s = std::array{16.0f, 32.0f, 64.0f}[(i / 3) % 3];
    EXPECT_NEAR(anchors[i].width * anchors[i].height, s * s, 1e-3 * s * s);
  }
}

TEST(Anchors, SquareAnchorExample) {
  const auto anchors = generate_anchors({{8, {32}, 1, 1}}, {1.0f});
  ASSERT_EQ(anchors.size(), 1u);
  EXPECT_EQ(anchors[0].box(), (Box{-12, -12, 20, 20}));
}

TEST(Anchors, RejectsDescendingStrides) {
  EXPECT_THROW(generate_anchors({{8, {32}, 1, 1}, {4, {16}, 1, 1}}, {1.0f}),
               std::invalid_argument);
  EXPECT_THROW(generate_anchors({{8, {32}, 1, 1}}, {}), std::invalid_argument);
}

TEST(Iou, Examples) {
  EXPECT_FLOAT_EQ(iou({0, 0, 10, 10}, {0, 0, 10, 10}), 1.0f);
  EXPECT_FLOAT_EQ(iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0f / 3.0f);
  EXPECT_FLOAT_EQ(iou({0, 0, 10, 10}, {10, 0, 20, 10}), 0.0f);
  EXPECT_FLOAT_EQ(iou({0, 0, 2, 2}, {1, 1, 3, 3}), 1.0f / 7.0f);
  EXPECT_FLOAT_EQ(iou({0, 0, 0, 10}, {0, 0, 0, 10}), 0.0f);
}

TEST(Iou, PropertiesAgainstOracle) {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    const Box a = random_box(rng, 64, false), b = random_box(rng, 64, false);
    const float v = iou(a, b);
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
    EXPECT_FLOAT_EQ(v, iou(b, a));
    EXPECT_NEAR(v, oracle::box_iou(a, b), 1e-6);
  }
}

TEST(BoxCoding, Examples) {
  const Box anchor{0, 0, 10, 10};
  const BoxDelta t = encode_box(anchor, {5, 5, 25, 25});
  EXPECT_FLOAT_EQ(t[0], 1.0f);
  EXPECT_FLOAT_EQ(t[1], 1.0f);
  EXPECT_NEAR(t[2], std::log(2.0f), 1e-6);
  EXPECT_NEAR(t[3], std::log(2.0f), 1e-6);
  const Box d = decode_box(anchor, {1, 1, std::log(2.0f), std::log(2.0f)});
  EXPECT_NEAR(d.xmin, 5, 1e-5);
  EXPECT_NEAR(d.ymin, 5, 1e-5);
  EXPECT_NEAR(d.xmax, 25, 1e-5);
  EXPECT_NEAR(d.ymax, 25, 1e-5);
  const BoxDelta z = encode_box(anchor, anchor);
  for (const float v : z) EXPECT_EQ(v, 0.0f);
}

TEST(BoxCoding, RoundTrip) {
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    const Box a = random_box(rng, 64, false), g = random_box(rng, 64, false);
    const Box r = decode_box(a, encode_box(a, g));
    EXPECT_NEAR(r.xmin, g.xmin, 1e-3);
    EXPECT_NEAR(r.ymin, g.ymin, 1e-3);
    EXPECT_NEAR(r.xmax, g.xmax, 1e-3);
    EXPECT_NEAR(r.ymax, g.ymax, 1e-3);
  }
}

TEST(BoxCoding, RejectsDegenerate) {
  EXPECT_THROW(encode_box({0, 0, 10, 10}, {3, 3, 3, 8}), std::invalid_argument);
  EXPECT_THROW(encode_box({0, 0, 0, 10}, {0, 0, 4, 4}), std::invalid_argument);
}

TEST(BoxCoding, ClipBox) {
  EXPECT_EQ(clip_box({-3, 2, 70, 80}, 64, 48), (Box{0, 2, 64, 48}));
}

TEST(MatchAnchors, Examples) {
  const std::vector<Box> anchors{{0, 0, 10, 10}, {2, 0, 12, 10}, {5, 0, 15, 10},
                                 {30, 30, 40, 40}, {100, 100, 110, 110}};
  const std::vector<Box> gts{{0, 0, 10, 10}, {32, 32, 44, 44}};
  const MatchResult m = match_anchors(anchors, gts, 0.7f, 0.3f);
  EXPECT_EQ(m.labels[0], AnchorLabel::positive);
  EXPECT_EQ(m.labels[1], AnchorLabel::ignore);  // IoU 8/12
  EXPECT_NEAR(m.max_iou[1], 8.0f / 12.0f, 1e-6);
  EXPECT_EQ(m.labels[2], AnchorLabel::ignore);  // IoU 1/3
  // Low IoU but the best anchor for gt 1.
  EXPECT_EQ(m.labels[3], AnchorLabel::positive);
  EXPECT_EQ(m.matched_gt[3], 1);
  EXPECT_EQ(m.labels[4], AnchorLabel::negative);
  EXPECT_EQ(m.matched_gt[4], -1);
  EXPECT_EQ(m.count(AnchorLabel::positive), 2u);
  const BoxDelta t = m.targets[3];
  const BoxDelta e = encode_box(anchors[3], gts[1]);
  for (int k = 0; k < 4; ++k) EXPECT_FLOAT_EQ(t[k], e[k]);
}

TEST(MatchAnchors, NoGtMeansAllNegative) {
  const MatchResult m = match_anchors({{0, 0, 4, 4}, {1, 1, 5, 5}}, {}, 0.7f, 0.3f);
  EXPECT_EQ(m.count(AnchorLabel::negative), 2u);
  EXPECT_THROW(match_anchors({}, {}, 0.3f, 0.7f), std::invalid_argument);
}

TEST(MatchAnchors, EveryGtGetsAPositive) {
  Rng rng(5);
  const auto anchors =
      boxes_of(generate_anchors({{16, {16, 32, 64}, 4, 4}}, {0.5f, 1.0f, 2.0f}));
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Box> gts;
    for (int g = 0; g < 3; ++g) gts.push_back(random_box(rng, 64, true));
    const MatchResult m = match_anchors(anchors, gts, 0.7f, 0.3f);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      bool covered = false;
      for (std::size_t a = 0; a < anchors.size(); ++a) {
        if (m.labels[a] == AnchorLabel::positive && m.matched_gt[a] == static_cast<int>(g)) {
          covered = true;
        }
      }
      // A gt loses its forced anchor only when another gt claims it with higher IoU.
      if (!covered) {
        float best = 0.0f;
        std::size_t arg = 0;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
          const float v = iou(anchors[a], gts[g]);
          if (v > best) best = v, arg = a;
        }
        EXPECT_NE(m.matched_gt[arg], static_cast<int>(g));
        EXPECT_EQ(m.labels[arg], AnchorLabel::positive);
      }
    }
    for (std::size_t a = 0; a < anchors.size(); ++a) {
      if (m.max_iou[a] >= 0.7f) {
        EXPECT_EQ(m.labels[a], AnchorLabel::positive);
      }
      if (m.labels[a] == AnchorLabel::negative) {
        EXPECT_LT(m.max_iou[a], 0.3f);
      }
    }
  }
}

TEST(Nms, Examples) {
  const std::vector<Detection> dets{{{0, 0, 10, 10}, 0, 0.9f},
                                    {{1, 0, 11, 10}, 0, 0.8f},  // IoU 9/11 with #0
                                    {{1, 0, 11, 10}, 1, 0.7f},  // other class
                                    {{5, 0, 15, 10}, 0, 0.95f},
                                    {{50, 50, 60, 60}, 0, 0.1f}};
  EXPECT_EQ(nms(dets, 0.5f), (std::vector<std::size_t>{3, 0, 2, 4}));
  EXPECT_EQ(nms(dets, 0.95f), (std::vector<std::size_t>{3, 0, 1, 2, 4}));
  EXPECT_TRUE(nms({}, 0.5f).empty());
}

TEST(Nms, TiesKeepLowerIndex) {
  const std::vector<Detection> dets{{{0, 0, 10, 10}, 0, 0.5f}, {{0, 0, 10, 10}, 0, 0.5f}};
  EXPECT_EQ(nms(dets, 0.5f), (std::vector<std::size_t>{0}));
  EXPECT_EQ(order_by_score({0.1f, 0.5f, 0.5f, 0.9f}), (std::vector<std::size_t>{3, 1, 2, 0}));
}

TEST(Nms, MatchesQuadraticOracle) {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(200));
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
      // quantised scores force ties
      dets.push_back({random_box(rng, 64, true), static_cast<int>(rng.below(3)),
                      static_cast<float>(rng.below(20)) / 20.0f});
    }
    for (const float t : {0.3f, 0.5f, 0.7f}) {
      const auto kept = nms(dets, t);
      EXPECT_EQ(kept, oracle::nms(dets, t));
      for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t j = i + 1; j < kept.size(); ++j)
          if (dets[kept[i]].class_id == dets[kept[j]].class_id) {
            EXPECT_LE(iou(dets[kept[i]].box, dets[kept[j]].box), t);
          }
    }
  }
}

TEST(RoiLevel, Rule) {
  const RoiLevelRule rule;
  EXPECT_EQ(roi_level({0, 0, 32, 32}, rule), 1);
  EXPECT_EQ(roi_level({0, 0, 16, 16}, rule), 0);
  EXPECT_EQ(roi_level({0, 0, 63, 63}, rule), 1);
  EXPECT_EQ(roi_level({0, 0, 64, 64}, rule), 2);
  EXPECT_EQ(roi_level({0, 0, 4, 4}, rule), 0);
  EXPECT_EQ(roi_level({0, 0, 500, 500}, rule), 2);
}

TEST(RoiExtract, ConstantMapInteriorIsConstant) {
  const std::vector<Tensor> levels{Tensor({1, 2, 16, 16}, 3.0f)};
  const Tensor out = roi_extract(levels, {4}, {8, 8, 40, 40}, 7, RoiLevelRule{0, 32, 0, 0});
  EXPECT_EQ(out.shape(), (Shape4{1, 2, 7, 7}));
  for (const float v : out.data()) EXPECT_FLOAT_EQ(v, 3.0f);
}

TEST(RoiExtract, MatchesDirectBilinearOracle) {
  Rng rng(41);
  std::vector<TensorD> levels;
  for (const int s : {4, 8, 16}) {
    TensorD t({1, 3, 64 / s, 64 / s});
    for (double& v : t.data()) v = rng.uniform(-1, 1);
    levels.push_back(t);
  }
  const std::vector<int> strides{4, 8, 16};
  const RoiLevelRule rule;
  for (int trial = 0; trial < 30; ++trial) {
    const Box roi = random_box(rng, 64, false);
    const int level = roi_level(roi, rule);
    const TensorD out = roi_extract(levels, strides, roi, 7, rule);
    const double s = strides[static_cast<std::size_t>(level)];
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j) {
          const double ix = roi.xmin + (j + 0.5) * roi.width() / 7.0;
          const double iy = roi.ymin + (i + 0.5) * roi.height() / 7.0;
          const double want =
              oracle::bilinear_g(levels[static_cast<std::size_t>(level)], 0, c, ix / s - 0.5,
                                 iy / s - 0.5);
          EXPECT_NEAR(out.at(0, c, i, j), want, 1e-9);
        }
  }
}

TEST(RoiExtract, BackwardIsAdjoint) {
  Rng rng(43);
  std::vector<TensorD> levels{TensorD({1, 2, 16, 16}), TensorD({1, 2, 8, 8}),
                              TensorD({1, 2, 4, 4})};
  for (auto& t : levels)
    for (double& v : t.data()) v = rng.uniform(-1, 1);
  const std::vector<int> strides{4, 8, 16};
  const Box roi{5.5, 7.25, 41, 30};
  const TensorD out = roi_extract(levels, strides, roi, 7, RoiLevelRule{});
  TensorD up(out.shape());
  for (double& v : up.data()) v = rng.uniform(-1, 1);
  std::vector<TensorD> grads{TensorD(levels[0].shape()), TensorD(levels[1].shape()),
                             TensorD(levels[2].shape())};
  roi_extract_backward(strides, roi, 7, RoiLevelRule{}, up, grads);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < out.data().size(); ++i) lhs += out.data()[i] * up.data()[i];
  for (std::size_t l = 0; l < 3; ++l)
    for (std::size_t i = 0; i < levels[l].data().size(); ++i)
      rhs += levels[l].data()[i] * grads[l].data()[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(RoiExtract, RejectsBadInput) {
  const std::vector<Tensor> levels{Tensor({1, 1, 8, 8})};
  EXPECT_THROW(roi_extract(levels, {4}, {3, 3, 3, 9}, 7, RoiLevelRule{0, 32, 0, 0}),
               std::invalid_argument);
  EXPECT_THROW(roi_extract(levels, {4, 8}, {0, 0, 9, 9}, 7, RoiLevelRule{0, 32, 0, 0}),
               ShapeError);
  EXPECT_THROW(roi_extract(levels, {4}, {0, 0, 64, 64}, 7, RoiLevelRule{}), ShapeError);
}

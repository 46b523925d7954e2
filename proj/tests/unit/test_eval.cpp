#include <gtest/gtest.h>

#include "../oracles.hpp"
#include "tdet/eval.hpp"
#include "tdet/rng.hpp"

using namespace tdet;
using namespace tdet::eval;

namespace {

// Greedy matching written from the definition: each detection scans every gt.
std::vector<bool> oracle_match(const std::vector<Detection>& dets,
                               const std::vector<BoxAnnotation>& gts, float thresh) {
  std::vector<bool> used(gts.size(), false), flags;
  for (const Detection& d : dets) {
    int best = -1;
    float best_iou = -1.0f;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || gts[g].class_id != d.class_id) continue;
      const float v = oracle::box_iou(d.box, gts[g].box);
      if (v >= thresh && v > best_iou) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) used[static_cast<std::size_t>(best)] = true;
    flags.push_back(best >= 0);
  }
  return flags;
}

Box int_box(Rng& rng) {
  const float x = static_cast<float>(rng.below(40)), y = static_cast<float>(rng.below(40));
  return {x, y, x + 4 + static_cast<float>(rng.below(16)), y + 4 + static_cast<float>(rng.below(16))};
}

}  // namespace

TEST(Match, Examples) {
  const std::vector<BoxAnnotation> gts{{0, {0, 0, 10, 10}}, {0, {0, 0, 10, 10}}, {1, {20, 20, 30, 30}}};
  const std::vector<Detection> dets{{{0, 0, 10, 10}, 0, 0.9f},
                                    {{0, 0, 10, 10}, 0, 0.8f},
                                    {{0, 0, 10, 10}, 0, 0.7f},
                                    {{20, 20, 30, 30}, 0, 0.6f},
                                    {{21, 20, 31, 30}, 1, 0.5f}};
  EXPECT_EQ(match_detections(dets, gts, 0.5f), (std::vector<bool>{true, true, false, false, true}));
  EXPECT_EQ(match_detections(dets, gts, 0.95f),
            (std::vector<bool>{true, true, false, false, false}));
  EXPECT_TRUE(match_detections({}, gts, 0.5f).empty());
}

TEST(Match, ThresholdIsInclusive) {
  // 10x10 inside 10x20: IoU exactly 1/2.
  const std::vector<BoxAnnotation> gts{{0, {0, 0, 10, 20}}};
  EXPECT_EQ(match_detections({{{0, 0, 10, 10}, 0, 1.0f}}, gts, 0.5f), std::vector<bool>{true});
}

TEST(Match, AgreesWithBruteForce) {
  Rng rng(8);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<BoxAnnotation> gts;
    for (int g = 0; g < 10; ++g) gts.push_back({static_cast<int>(rng.below(2)), int_box(rng)});
    std::vector<Detection> dets;
    for (int d = 0; d < 30; ++d) {
      Box b = rng.below(2) ? gts[rng.below(10)].box : int_box(rng);
      b.xmin += static_cast<float>(rng.below(3));
      dets.push_back({b, static_cast<int>(rng.below(2)), 0.0f});
    }
    for (const float t : {0.3f, 0.5f, 0.75f})
      EXPECT_EQ(match_detections(dets, gts, t), oracle_match(dets, gts, t));
  }
}

TEST(AveragePrecision, Examples) {
  EXPECT_DOUBLE_EQ(average_precision({true}, {0.9f}, 1), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({true, true}, {0.9f, 0.1f}, 2), 1.0);
  EXPECT_DOUBLE_EQ(average_precision({true}, {0.9f}, 2), 0.5);
  EXPECT_DOUBLE_EQ(average_precision({false, true}, {0.9f, 0.8f}, 1), 0.5);
  // Envelope: ranks T F T give 1/2 * 1 + 1/2 * 2/3.
  EXPECT_NEAR(average_precision({true, false, true}, {0.9f, 0.8f, 0.7f}, 2), 5.0 / 6.0, 1e-12);
  // Input order does not matter, only the score ranking.
  EXPECT_NEAR(average_precision({true, true, false}, {0.7f, 0.9f, 0.8f}, 2), 5.0 / 6.0, 1e-12);
  EXPECT_DOUBLE_EQ(average_precision({}, {}, 3), 0.0);
  EXPECT_THROW(average_precision({true}, {0.5f}, 0), std::invalid_argument);
}

TEST(AveragePrecision, MatchesBruteForceEnvelope) {
  Rng rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = rng.below(40);
    std::vector<bool> flags(n);
    std::vector<float> scores(n);
    std::size_t tp = 0;
    for (std::size_t i = 0; i < n; ++i) {
      flags[i] = rng.below(2) == 1;
      tp += flags[i] ? 1 : 0;
      scores[i] = static_cast<float>(rng.below(10)) / 10.0f;
    }
    const std::size_t n_gt = tp + rng.below(4) + (tp == 0 ? 1 : 0);
    const double ap = average_precision(flags, scores, n_gt);
    EXPECT_NEAR(ap, oracle::average_precision(flags, scores, n_gt), 1e-12);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, static_cast<double>(tp) / static_cast<double>(n_gt) + 1e-12);
    // Appending a false positive below every score leaves AP unchanged.
    flags.push_back(false);
    scores.push_back(-1.0f);
    EXPECT_NEAR(average_precision(flags, scores, n_gt), ap, 1e-12);
  }
}

TEST(Evaluate, HandComputedExample) {
  const std::vector<ImageAnnotation> gts{{"a", {0, {0, 0, 10, 10}}},
                                         {"a", {0, {20, 20, 30, 30}}},
                                         {"b", {0, {0, 0, 10, 10}}},
                                         {"a", {1, {40, 40, 50, 50}}}};
  const std::vector<ImageDetection> dets{{"a", {{0, 0, 10, 10}, 0, 0.9f}},
                                         {"a", {{1, 0, 11, 10}, 0, 0.8f}},
                                         {"b", {{50, 50, 60, 60}, 0, 0.7f}},
                                         {"b", {{0, 0, 10, 10}, 0, 0.6f}},
                                         {"a", {{20, 20, 30, 30}, 0, 0.3f}},
                                         {"a", {{40, 40, 50, 50}, 2, 0.9f}},
                                         {"b", {{0, 0, 10, 10}, 1, 0.95f}}};
  const EvalReport r = evaluate(dets, gts);
  ASSERT_EQ(r.per_class.size(), 2u);
  const ClassMetrics& c0 = r.per_class[0];
  // Ranks T F F T T over 3 gts: 1/3 * 1 + 2/3 * 3/5.
  EXPECT_NEAR(c0.ap, 1.0 / 3.0 + 0.4, 1e-12);
  EXPECT_NEAR(c0.ar, 1.0, 1e-12);
  EXPECT_NEAR(c0.precision, 0.5, 1e-12);
  EXPECT_NEAR(c0.recall, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(c0.f1, 4.0 / 7.0, 1e-12);
  EXPECT_EQ(c0.n_det, 5u);
  const ClassMetrics& c1 = r.per_class[1];
  EXPECT_EQ(c1.ap, 0.0);
  EXPECT_EQ(c1.precision, 0.0);
  EXPECT_EQ(c1.n_det, 1u);
  EXPECT_NEAR(r.map, (1.0 / 3.0 + 0.4) / 2.0, 1e-12);
  EXPECT_EQ(r.num_gt, 4u);
  EXPECT_EQ(r.num_det, 7u);
}

TEST(Evaluate, PerfectAndEmpty) {
  std::vector<ImageAnnotation> gts;
  std::vector<ImageDetection> dets;
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const std::string img = "i" + std::to_string(i % 5);
    const BoxAnnotation a{static_cast<int>(rng.below(3)), int_box(rng)};
    gts.push_back({img, a});
    dets.push_back({img, {a.box, a.class_id, 0.99f}});
  }
  const EvalReport perfect = evaluate(dets, gts);
  EXPECT_DOUBLE_EQ(perfect.map, 1.0);
  EXPECT_DOUBLE_EQ(perfect.mar, 1.0);
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
  const EvalReport none = evaluate({}, gts);
  EXPECT_EQ(none.map, 0.0);
  EXPECT_EQ(none.mar, 0.0);
  EXPECT_THROW(evaluate(dets, {}), std::invalid_argument);
}

TEST(Evaluate, ImagesDoNotCrossMatch) {
  const std::vector<ImageAnnotation> gts{{"a", {0, {0, 0, 10, 10}}}};
  const EvalReport r = evaluate({{"b", {{0, 0, 10, 10}, 0, 0.9f}}}, gts);
  EXPECT_EQ(r.map, 0.0);
}

TEST(Evaluate, TopKLimitsRecall) {
  std::vector<ImageAnnotation> gts;
  std::vector<ImageDetection> dets;
  for (int i = 0; i < 4; ++i) {
    const Box b{20.0f * i, 0, 20.0f * i + 10, 10};
    gts.push_back({"a", {0, b}});
    dets.push_back({"a", {b, 0, 0.9f - 0.1f * i}});
  }
  EvalOptions o;
  o.max_dets_per_image = 2;
  const EvalReport r = evaluate(dets, gts, o);
  EXPECT_DOUBLE_EQ(r.mar, 0.5);
  EXPECT_DOUBLE_EQ(r.map, 1.0);
  o.score_thresh = 0.75f;
  EXPECT_DOUBLE_EQ(evaluate(dets, gts, o).mean_recall, 0.5);
}

TEST(Evaluate, ScoreMonotoneTransformInvariance) {
  Rng rng(21);
  std::vector<ImageAnnotation> gts;
  std::vector<ImageDetection> dets, squashed;
  for (int i = 0; i < 40; ++i) {
    const std::string img = "i" + std::to_string(i % 4);
    gts.push_back({img, {static_cast<int>(rng.below(2)), int_box(rng)}});
  }
  for (int i = 0; i < 60; ++i) {
    const std::string img = "i" + std::to_string(rng.below(4));
    const Detection d{int_box(rng), static_cast<int>(rng.below(2)),
                      static_cast<float>(rng.uniform())};
    dets.push_back({img, d});
    Detection s = d;
    s.score = d.score * d.score;
    squashed.push_back({img, s});
  }
  EXPECT_DOUBLE_EQ(evaluate(dets, gts).map, evaluate(squashed, gts).map);
}

TEST(Evaluate, ReportFormats) {
  const std::vector<ImageAnnotation> gts{{"a", {0, {0, 0, 10, 10}}}};
  const EvalReport r = evaluate({{"a", {{0, 0, 10, 10}, 0, 0.9f}}}, gts);
  const std::string csv = report_csv(r, {"square"});
  EXPECT_EQ(csv.rfind("class,n_gt,n_det,ap,ar,precision,recall,f1\n", 0), 0u);
  EXPECT_NE(csv.find("square,1,1,"), std::string::npos);
  EXPECT_NE(csv.find("\nall,1,1,"), std::string::npos);
  EXPECT_NE(report_table(r, {"square"}).find("square"), std::string::npos);
}

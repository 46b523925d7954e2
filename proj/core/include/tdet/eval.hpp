#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tdet/boxes.hpp"
#include "tdet/nms.hpp"

namespace tdet::eval {

struct ImageDetection {
  std::string image;
  Detection det;
};

struct ImageAnnotation {
  std::string image;
  BoxAnnotation ann;
};

// Greedy matching within one image. `dets` must already be ordered by
// descending score. Each detection takes the highest-IoU still-unmatched gt of
// its class with IoU >= iou_thresh (ties: lower gt index); flag true = TP.
std::vector<bool> match_detections(const std::vector<Detection>& dets,
                                   const std::vector<BoxAnnotation>& gts, float iou_thresh);

// All-points area under the precision/recall curve with the monotone
// precision envelope. Flags/scores are in any order; they are ranked by score
// descending with ties kept in input order. Requires n_gt >= 1.
double average_precision(const std::vector<bool>& flags, const std::vector<float>& scores,
                         std::size_t n_gt);

struct ClassMetrics {
  int class_id = 0;
  std::size_t n_gt = 0;
  std::size_t n_det = 0;
  double ap = 0.0;
  double ar = 0.0;         // recall using the top-k detections per image
  double precision = 0.0;  // at score >= score_thresh
  double recall = 0.0;     // at score >= score_thresh
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<ClassMetrics> per_class;  // classes with at least one gt, ascending id
  double map = 0.0;
  double mar = 0.0;
  double f1 = 0.0;
  double mean_precision = 0.0;
  double mean_recall = 0.0;
  std::size_t num_gt = 0;
  std::size_t num_det = 0;
  float iou_thresh = 0.5f;
  float score_thresh = 0.5f;
};

struct EvalOptions {
  float iou_thresh = 0.5f;
  float score_thresh = 0.5f;
  std::size_t max_dets_per_image = 100;
};

// Throws std::invalid_argument when there is no ground truth at all.
EvalReport evaluate(const std::vector<ImageDetection>& dets,
                    const std::vector<ImageAnnotation>& gts, const EvalOptions& options = {});

// Per-class rows followed by an "all" aggregate row.
std::string report_csv(const EvalReport& report, const std::vector<std::string>& class_names = {});
std::string report_table(const EvalReport& report,
                         const std::vector<std::string>& class_names = {});

}  // namespace tdet::eval

#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "tdet/adam.hpp"
#include "tdet/config.hpp"
#include "tdet/dataset.hpp"
#include "tdet/detect.hpp"
#include "tdet/model.hpp"
#include "tdet/rng.hpp"

namespace tdet {

// Ten consecutive non-finite steps; the CLI maps this to exit code 3.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxConsecutiveSkips = 10;

struct MatchThresholds {
  float rpn_positive = 0.7f;
  float rpn_negative = 0.3f;
  float head_positive = 0.5f;
};

struct StepLosses {
  double total = 0.0;
  double classification = 0.0;  // RPN + head
  double regression = 0.0;       // RPN + head
  bool skipped = false;
};

struct TrainExample {
  Tensor input;  // (1, 3, H, W)
  int height = 0;
  int width = 0;
  std::vector<BoxAnnotation> boxes;
};

TrainExample make_example(const Image& image, std::vector<BoxAnnotation> boxes);

// Zeroes the gradients, then runs forward, both-stage sampling and loss, and
// backward for one image. `sampler` draws the anchor and RoI minibatches.
StepLosses compute_gradients(model::Detector& detector, const TrainExample& example,
                             const TrainConfig& train, const loss::LossConfig& loss, Rng& sampler,
                             const MatchThresholds& thresholds = {},
                             const ProposalConfig& proposals = {});

// Single-image-batch Adam training over `data`, visiting images in a fresh
// seeded permutation each epoch. Non-finite steps are skipped (logged as nan)
// and DivergenceError is thrown after kMaxConsecutiveSkips in a row. When
// `log_csv` is set it receives `step,total_loss,cls_loss,reg_loss` rows,
// flushed every step.
std::vector<StepLosses> train_detector(model::Detector& detector,
                                       const std::vector<TrainExample>& data,
                                       const RunConfig& config, std::ostream* log_csv = nullptr);

inline constexpr const char* kLossLogHeader = "step,total_loss,cls_loss,reg_loss";

}  // namespace tdet

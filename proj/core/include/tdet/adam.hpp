#pragma once

#include <cstdint>
#include <vector>

#include "tdet/params.hpp"

namespace tdet {

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moments mirror the parameter list they were created for.
struct AdamState {
  AdamHyper hyper;
  std::int64_t step = 0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;

  explicit AdamState(AdamHyper h = {}) : hyper(h) {}
};

// Bias-corrected Adam update of every parameter from its grad span. Moment
// buffers are allocated on the first call; later calls must pass parameters
// of identical sizes in the same order (ShapeError otherwise).
void adam_step(const std::vector<ParamRef>& params, AdamState& state);

}  // namespace tdet

#include "tdet/adam.hpp"

#include <cmath>

#include "tdet/tensor.hpp"

namespace tdet {

void adam_step(const std::vector<ParamRef>& params, AdamState& state) {
  if (state.m.empty() && state.step == 0) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].value.size(), 0.0f);
      state.v[i].assign(params[i].value.size(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state has " + std::to_string(state.m.size()) +
                     " slots for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].grad.size() != params[i].value.size() ||
        state.m[i].size() != params[i].value.size()) {
      throw ShapeError("adam_step: shape mismatch for parameter " + params[i].name);
    }
  }

  ++state.step;
  const AdamHyper& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const ParamRef& p = params[i];
    std::vector<float>& m = state.m[i];
    std::vector<float>& v = state.v[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      const double mj = h.beta1 * m[j] + (1.0 - h.beta1) * g;
      const double vj = h.beta2 * v[j] + (1.0 - h.beta2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = h.lr * (mj / correction1) / (std::sqrt(vj / correction2) + h.eps);
      p.value[j] = static_cast<float>(p.value[j] - update);
    }
  }
}

}  // namespace tdet

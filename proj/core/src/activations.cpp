#include "tdet/activations.hpp"

#include <algorithm>
#include <cmath>

namespace tdet {

Tensor activate(const Tensor& input, Activation kind) {
  switch (kind) {
    case Activation::relu:
      return relu(input);
    case Activation::softmax_channels:
      return softmax_channels(input);
  }
  return input;
}

Tensor relu(const Tensor& input) {
  Tensor out = input;
  for (float& v : out.data()) v = v < 0.0f ? 0.0f : v;  // NaN passes through
  return out;
}

Tensor relu_backward(const Tensor& forward_input, const Tensor& upstream) {
  if (forward_input.shape() != upstream.shape()) {
    throw ShapeError("relu_backward: " + to_string(forward_input.shape()) + " vs " +
                     to_string(upstream.shape()));
  }
  Tensor grad(upstream.shape());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    grad.data()[i] = forward_input.data()[i] > 0.0f ? upstream.data()[i] : 0.0f;
  }
  return grad;
}

Tensor softmax_channels(const Tensor& input) {
  if (input.c() < 1) throw ShapeError("softmax needs at least one channel");
  Tensor out(input.shape());
  const std::size_t plane = input.shape().plane();
  for (int n = 0; n < input.n(); ++n) {
    const float* src = input.data().data() + input.index(n, 0, 0, 0);
    float* dst = &out.at(n, 0, 0, 0);
    for (std::size_t p = 0; p < plane; ++p) {
      float peak = src[p];
      for (int c = 1; c < input.c(); ++c) peak = std::max(peak, src[c * plane + p]);
      double total = 0.0;
      for (int c = 0; c < input.c(); ++c) {
        const float e = std::exp(src[c * plane + p] - peak);
        dst[c * plane + p] = e;
        total += e;
      }
      const auto inv = static_cast<float>(1.0 / total);
      for (int c = 0; c < input.c(); ++c) dst[c * plane + p] *= inv;
    }
  }
  return out;
}

float sigmoid(float x) {
  if (x >= 0.0f) return 1.0f / (1.0f + std::exp(-x));
  const float e = std::exp(x);
  return e / (1.0f + e);
}

}  // namespace tdet

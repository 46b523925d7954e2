#pragma once

#include "tdet/tensor.hpp"

namespace tdet {

enum class Activation { relu, softmax_channels };

Tensor activate(const Tensor& input, Activation kind);

Tensor relu(const Tensor& input);
// Passes upstream where the forward input was positive.
Tensor relu_backward(const Tensor& forward_input, const Tensor& upstream);

// Per (n, y, x): exp-normalise across channels (max-shifted).
Tensor softmax_channels(const Tensor& input);

float sigmoid(float x);

}  // namespace tdet

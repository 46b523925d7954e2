#pragma once

#include <vector>

#include "tdet/tensor.hpp"

namespace tdet {

struct ConvGeometry {
  int stride = 1;
  int pad = 0;
};

// Kernel bank (out_channels, in_channels, kh, kw) plus one bias per output
// channel. Odd kernel sides keep the sampling grid centred.
template <std::floating_point T>
struct BasicConvWeights {
  BasicTensor<T> weight;
  std::vector<T> bias;

  BasicConvWeights() = default;
  BasicConvWeights(int out_channels, int in_channels, int kh, int kw)
      : weight(Shape4{out_channels, in_channels, kh, kw}),
        bias(static_cast<std::size_t>(out_channels), T(0)) {}

  int out_channels() const { return weight.n(); }
  int in_channels() const { return weight.c(); }
  int kh() const { return weight.h(); }
  int kw() const { return weight.w(); }

  // Throws ShapeError unless kernel sides are odd and bias matches.
  void validate() const;
};

using ConvWeights = BasicConvWeights<float>;

// Output dims for a convolution of `input` by a (kh x kw) kernel.
Shape4 conv_output_shape(const Shape4& input, int out_channels, int kh, int kw, ConvGeometry g);

template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvWeights<T>& weights,
                      ConvGeometry geometry);

template <std::floating_point T>
struct ConvGrads {
  BasicTensor<T> input;
  BasicConvWeights<T> weights;  // gradient w.r.t. weight and bias
};

template <std::floating_point T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvWeights<T>& weights,
                             ConvGeometry geometry, const BasicTensor<T>& upstream);

}  // namespace tdet

#pragma once

#include <vector>

#include "tdet/conv.hpp"

namespace tdet::detail {

// Column buffer layout: row r = (c * kh + ky) * kw + kx, column = oy * ow + ox.
template <std::floating_point T>
void im2col(const BasicTensor<T>& input, int n, int kh, int kw, ConvGeometry g, int oh, int ow,
            std::vector<T>& columns);

template <std::floating_point T>
void col2im(const std::vector<T>& columns, int n, int kh, int kw, ConvGeometry g, int oh, int ow,
            BasicTensor<T>& grad_input);

// out(n) = W * columns + bias
template <std::floating_point T>
void columns_forward(const BasicConvWeights<T>& weights, const std::vector<T>& columns,
                     std::size_t positions, T* out);

// Accumulates dW, db from one batch item and writes dcolumns = W^T * dY.
template <std::floating_point T>
void columns_backward(const BasicConvWeights<T>& weights, const std::vector<T>& columns,
                      std::size_t positions, const T* upstream, BasicConvWeights<T>& grads,
                      std::vector<T>& grad_columns);

}  // namespace tdet::detail

#pragma once

#include "tdet/conv.hpp"
#include "tdet/tensor.hpp"

namespace tdet {

// Bilinear interpolation of the four lattice neighbours of (x, y); x indexes
// columns, y rows. Neighbours outside the plane read as zero, so the function
// is total and decays to 0 a pixel beyond the border.
template <std::floating_point T>
T bilinear_sample(const PlaneView<T>& map, T x, T y);

// Partial derivatives of bilinear_sample with respect to the sample position.
template <std::floating_point T>
struct BilinearPositionGrad {
  T value;
  T d_dx;
  T d_dy;
};

template <std::floating_point T>
BilinearPositionGrad<T> bilinear_sample_with_grad(const PlaneView<T>& map, T x, T y);

// Adds weight * (d sample / d pixel) into `grad_plane` (h x w), i.e. the
// adjoint of bilinear_sample with respect to the map values.
template <std::floating_point T>
void bilinear_scatter(std::span<T> grad_plane, int h, int w, T x, T y, T weight);

// Offset field layout: shape (n, 2*kh*kw, out_h, out_w); channel 2k holds the
// x displacement and 2k+1 the y displacement of kernel tap k = ky*kw + kx.
template <std::floating_point T>
using BasicOffsetField = BasicTensor<T>;
using OffsetField = BasicOffsetField<float>;

// y(p) = sum_k w_k * x(p*stride - pad + tap_k + offset_k(p)) + bias
template <std::floating_point T>
BasicTensor<T> deformable_conv2d(const BasicTensor<T>& input, const BasicOffsetField<T>& offsets,
                                 const BasicConvWeights<T>& weights, ConvGeometry geometry);

template <std::floating_point T>
struct DeformConvGrads {
  BasicTensor<T> input;
  BasicOffsetField<T> offsets;
  BasicConvWeights<T> weights;
};

template <std::floating_point T>
DeformConvGrads<T> deformable_conv2d_backward(const BasicTensor<T>& input,
                                              const BasicOffsetField<T>& offsets,
                                              const BasicConvWeights<T>& weights,
                                              ConvGeometry geometry,
                                              const BasicTensor<T>& upstream);

}  // namespace tdet

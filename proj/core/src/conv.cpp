#include "tdet/conv.hpp"

#include "conv_detail.hpp"
#include <algorithm>

#include "tdet/gemm.hpp"

namespace tdet {

template <std::floating_point T>
void BasicConvWeights<T>::validate() const {
  if (kh() % 2 == 0 || kw() % 2 == 0) {
    throw ShapeError("kernel sides must be odd, got " + std::to_string(kh()) + "x" +
                     std::to_string(kw()));
  }
  if (bias.size() != static_cast<std::size_t>(out_channels())) {
    throw ShapeError("bias length " + std::to_string(bias.size()) + " != out channels " +
                     std::to_string(out_channels()));
  }
}

Shape4 conv_output_shape(const Shape4& input, int out_channels, int kh, int kw, ConvGeometry g) {
  if (g.stride < 1 || g.pad < 0) throw ShapeError("stride must be >= 1 and pad >= 0");
  const int oh = (input.h + 2 * g.pad - kh) / g.stride + 1;
  const int ow = (input.w + 2 * g.pad - kw) / g.stride + 1;
  if (input.h + 2 * g.pad < kh || input.w + 2 * g.pad < kw) {
    throw ShapeError("kernel larger than padded input " + to_string(input));
  }
  return {input.n, out_channels, oh, ow};
}

namespace detail {

template <std::floating_point T>
void im2col(const BasicTensor<T>& input, int n, int kh, int kw, ConvGeometry g, int oh, int ow,
            std::vector<T>& columns) {
  const int channels = input.c();
  const std::size_t positions = static_cast<std::size_t>(oh) * ow;
  columns.assign(static_cast<std::size_t>(channels) * kh * kw * positions, T(0));
  for (int c = 0; c < channels; ++c) {
    const PlaneView<T> plane = input.view(n, c);
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        T* row = columns.data() + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * positions;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= plane.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= plane.w) continue;
            row[static_cast<std::size_t>(oy) * ow + ox] = plane.at(iy, ix);
          }
        }
      }
    }
  }
}

template <std::floating_point T>
void col2im(const std::vector<T>& columns, int n, int kh, int kw, ConvGeometry g, int oh, int ow,
            BasicTensor<T>& grad_input) {
  const int channels = grad_input.c();
  const std::size_t positions = static_cast<std::size_t>(oh) * ow;
  for (int c = 0; c < channels; ++c) {
    std::span<T> plane = grad_input.plane(n, c);
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const T* row =
            columns.data() + ((static_cast<std::size_t>(c) * kh + ky) * kw + kx) * positions;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= grad_input.h()) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= grad_input.w()) continue;
            plane[static_cast<std::size_t>(iy) * grad_input.w() + ix] +=
                row[static_cast<std::size_t>(oy) * ow + ox];
          }
        }
      }
    }
  }
}

template <std::floating_point T>
void columns_forward(const BasicConvWeights<T>& weights, const std::vector<T>& columns,
                     std::size_t positions, T* out) {
  const std::size_t out_ch = static_cast<std::size_t>(weights.out_channels());
  const std::size_t k = weights.weight.size() / out_ch;
  for (std::size_t o = 0; o < out_ch; ++o) {
    std::fill(out + o * positions, out + (o + 1) * positions, T(0));
  }
  gemm_nn(out_ch, positions, k, weights.weight.data().data(), columns.data(), out);
  for (std::size_t o = 0; o < out_ch; ++o) {
    const T b = weights.bias[o];
    for (std::size_t p = 0; p < positions; ++p) out[o * positions + p] += b;
  }
}

template <std::floating_point T>
void columns_backward(const BasicConvWeights<T>& weights, const std::vector<T>& columns,
                      std::size_t positions, const T* upstream, BasicConvWeights<T>& grads,
                      std::vector<T>& grad_columns) {
  const std::size_t out_ch = static_cast<std::size_t>(weights.out_channels());
  const std::size_t k = weights.weight.size() / out_ch;
  gemm_nt(out_ch, k, positions, upstream, columns.data(), grads.weight.data().data());
  for (std::size_t o = 0; o < out_ch; ++o) {
    T acc = T(0);
    for (std::size_t p = 0; p < positions; ++p) acc += upstream[o * positions + p];
    grads.bias[o] += acc;
  }
  grad_columns.assign(k * positions, T(0));
  gemm_tn(k, positions, out_ch, weights.weight.data().data(), upstream, grad_columns.data());
}

template void im2col<float>(const Tensor&, int, int, int, ConvGeometry, int, int, std::vector<float>&);
template void im2col<double>(const TensorD&, int, int, int, ConvGeometry, int, int, std::vector<double>&);
template void col2im<float>(const std::vector<float>&, int, int, int, ConvGeometry, int, int, Tensor&);
template void col2im<double>(const std::vector<double>&, int, int, int, ConvGeometry, int, int, TensorD&);
template void columns_forward<float>(const BasicConvWeights<float>&, const std::vector<float>&, std::size_t, float*);
template void columns_forward<double>(const BasicConvWeights<double>&, const std::vector<double>&, std::size_t, double*);
template void columns_backward<float>(const BasicConvWeights<float>&, const std::vector<float>&, std::size_t, const float*, BasicConvWeights<float>&, std::vector<float>&);
template void columns_backward<double>(const BasicConvWeights<double>&, const std::vector<double>&, std::size_t, const double*, BasicConvWeights<double>&, std::vector<double>&);

}  // namespace detail

template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvWeights<T>& weights,
                      ConvGeometry geometry) {
  weights.validate();
  if (input.c() != weights.in_channels()) {
    throw ShapeError("conv2d: input channels " + std::to_string(input.c()) +
                     " != weight in_channels " + std::to_string(weights.in_channels()));
  }
  const Shape4 out_shape =
      conv_output_shape(input.shape(), weights.out_channels(), weights.kh(), weights.kw(), geometry);
  BasicTensor<T> out(out_shape);
  std::vector<T> columns;
  const std::size_t positions = out_shape.plane();
  for (int n = 0; n < input.n(); ++n) {
    detail::im2col(input, n, weights.kh(), weights.kw(), geometry, out_shape.h, out_shape.w,
                   columns);
    detail::columns_forward(weights, columns, positions, &out.at(n, 0, 0, 0));
  }
  return out;
}

template <std::floating_point T>
ConvGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvWeights<T>& weights,
                             ConvGeometry geometry, const BasicTensor<T>& upstream) {
  weights.validate();
  if (input.c() != weights.in_channels()) {
    throw ShapeError("conv2d_backward: input/weight channel mismatch");
  }
  const Shape4 out_shape =
      conv_output_shape(input.shape(), weights.out_channels(), weights.kh(), weights.kw(), geometry);
  if (upstream.shape() != out_shape) {
    throw ShapeError("conv2d_backward: upstream " + to_string(upstream.shape()) +
                     " != output " + to_string(out_shape));
  }
  ConvGrads<T> grads{BasicTensor<T>(input.shape()),
                     BasicConvWeights<T>(weights.out_channels(), weights.in_channels(),
                                         weights.kh(), weights.kw())};
  std::vector<T> columns;
  std::vector<T> grad_columns;
  const std::size_t positions = out_shape.plane();
  for (int n = 0; n < input.n(); ++n) {
    detail::im2col(input, n, weights.kh(), weights.kw(), geometry, out_shape.h, out_shape.w,
                   columns);
    detail::columns_backward(weights, columns, positions, upstream.data().data() + upstream.index(n, 0, 0, 0),
                             grads.weights, grad_columns);
    detail::col2im(grad_columns, n, weights.kh(), weights.kw(), geometry, out_shape.h,
                   out_shape.w, grads.input);
  }
  return grads;
}

template struct BasicConvWeights<float>;
template struct BasicConvWeights<double>;
template Tensor conv2d<float>(const Tensor&, const ConvWeights&, ConvGeometry);
template TensorD conv2d<double>(const TensorD&, const BasicConvWeights<double>&, ConvGeometry);
template ConvGrads<float> conv2d_backward<float>(const Tensor&, const ConvWeights&, ConvGeometry, const Tensor&);
template ConvGrads<double> conv2d_backward<double>(const TensorD&, const BasicConvWeights<double>&, ConvGeometry, const TensorD&);

}  // namespace tdet

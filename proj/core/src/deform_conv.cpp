#include "tdet/deform_conv.hpp"

#include <cmath>

#include "conv_detail.hpp"

namespace tdet {

namespace {

template <std::floating_point T>
T read_zero(const PlaneView<T>& map, int y, int x) {
  return map.contains(y, x) ? map.at(y, x) : T(0);
}

template <std::floating_point T>
Shape4 checked_output_shape(const BasicTensor<T>& input, const BasicTensor<T>& offsets,
                            const BasicConvWeights<T>& weights, ConvGeometry geometry) {
  weights.validate();
  if (input.c() != weights.in_channels()) {
    throw ShapeError("deformable_conv2d: input channels " + std::to_string(input.c()) +
                     " != weight in_channels " + std::to_string(weights.in_channels()));
  }
  const Shape4 out =
      conv_output_shape(input.shape(), weights.out_channels(), weights.kh(), weights.kw(), geometry);
  const Shape4 expected{input.n(), 2 * weights.kh() * weights.kw(), out.h, out.w};
  if (offsets.shape() != expected) {
    throw ShapeError("deformable_conv2d: offsets " + to_string(offsets.shape()) + ", expected " +
                     to_string(expected));
  }
  return out;
}

// Deformable counterpart of im2col: every column entry is a bilinear sample.
template <std::floating_point T>
void deformable_im2col(const BasicTensor<T>& input, const BasicTensor<T>& offsets, int n, int kh,
                       int kw, ConvGeometry g, int oh, int ow, std::vector<T>& columns) {
  const std::size_t positions = static_cast<std::size_t>(oh) * ow;
  columns.assign(static_cast<std::size_t>(input.c()) * kh * kw * positions, T(0));
  for (int ky = 0; ky < kh; ++ky) {
    for (int kx = 0; kx < kw; ++kx) {
      const int tap = ky * kw + kx;
      const PlaneView<T> off_x = offsets.view(n, 2 * tap);
      const PlaneView<T> off_y = offsets.view(n, 2 * tap + 1);
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          const T sx = static_cast<T>(ox * g.stride - g.pad + kx) + off_x.at(oy, ox);
          const T sy = static_cast<T>(oy * g.stride - g.pad + ky) + off_y.at(oy, ox);
          const std::size_t col = static_cast<std::size_t>(oy) * ow + ox;
          for (int c = 0; c < input.c(); ++c) {
            const std::size_t row = (static_cast<std::size_t>(c) * kh + ky) * kw + kx;
            columns[row * positions + col] = bilinear_sample(input.view(n, c), sx, sy);
          }
        }
      }
    }
  }
}

}  // namespace

template <std::floating_point T>
T bilinear_sample(const PlaneView<T>& map, T x, T y) {
  const T fx0 = std::floor(x);
  const T fy0 = std::floor(y);
  // Far outside (or NaN): every neighbour reads zero. Keeps the int casts in range.
  if (!(fx0 >= T(-1) && fy0 >= T(-1) && fx0 <= static_cast<T>(map.w) &&
        fy0 <= static_cast<T>(map.h))) {
    return T(0);
  }
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const T ax = x - fx0;
  const T ay = y - fy0;
  const T v00 = read_zero(map, y0, x0);
  const T v01 = read_zero(map, y0, x0 + 1);
  const T v10 = read_zero(map, y0 + 1, x0);
  const T v11 = read_zero(map, y0 + 1, x0 + 1);
  return (T(1) - ay) * ((T(1) - ax) * v00 + ax * v01) + ay * ((T(1) - ax) * v10 + ax * v11);
}

template <std::floating_point T>
BilinearPositionGrad<T> bilinear_sample_with_grad(const PlaneView<T>& map, T x, T y) {
  const T fx0 = std::floor(x);
  const T fy0 = std::floor(y);
  if (!(fx0 >= T(-1) && fy0 >= T(-1) && fx0 <= static_cast<T>(map.w) &&
        fy0 <= static_cast<T>(map.h))) {
    return {T(0), T(0), T(0)};
  }
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const T ax = x - fx0;
  const T ay = y - fy0;
  const T v00 = read_zero(map, y0, x0);
  const T v01 = read_zero(map, y0, x0 + 1);
  const T v10 = read_zero(map, y0 + 1, x0);
  const T v11 = read_zero(map, y0 + 1, x0 + 1);
  return {
      (T(1) - ay) * ((T(1) - ax) * v00 + ax * v01) + ay * ((T(1) - ax) * v10 + ax * v11),
      (T(1) - ay) * (v01 - v00) + ay * (v11 - v10),
      (T(1) - ax) * (v10 - v00) + ax * (v11 - v01),
  };
}

template <std::floating_point T>
void bilinear_scatter(std::span<T> grad_plane, int h, int w, T x, T y, T weight) {
  const T fx0 = std::floor(x);
  const T fy0 = std::floor(y);
  if (!(fx0 >= T(-1) && fy0 >= T(-1) && fx0 <= static_cast<T>(w) && fy0 <= static_cast<T>(h))) {
    return;
  }
  const int x0 = static_cast<int>(fx0);
  const int y0 = static_cast<int>(fy0);
  const T ax = x - fx0;
  const T ay = y - fy0;
  const auto add = [&](int yy, int xx, T v) {
    if (yy >= 0 && yy < h && xx >= 0 && xx < w) {
      grad_plane[static_cast<std::size_t>(yy) * w + xx] += v;
    }
  };
  add(y0, x0, weight * (T(1) - ay) * (T(1) - ax));
  add(y0, x0 + 1, weight * (T(1) - ay) * ax);
  add(y0 + 1, x0, weight * ay * (T(1) - ax));
  add(y0 + 1, x0 + 1, weight * ay * ax);
}

template <std::floating_point T>
BasicTensor<T> deformable_conv2d(const BasicTensor<T>& input, const BasicOffsetField<T>& offsets,
                                 const BasicConvWeights<T>& weights, ConvGeometry geometry) {
  const Shape4 out_shape = checked_output_shape(input, offsets, weights, geometry);
  BasicTensor<T> out(out_shape);
  std::vector<T> columns;
  for (int n = 0; n < input.n(); ++n) {
    deformable_im2col(input, offsets, n, weights.kh(), weights.kw(), geometry, out_shape.h,
                      out_shape.w, columns);
    detail::columns_forward(weights, columns, out_shape.plane(), &out.at(n, 0, 0, 0));
  }
  return out;
}

template <std::floating_point T>
DeformConvGrads<T> deformable_conv2d_backward(const BasicTensor<T>& input,
                                              const BasicOffsetField<T>& offsets,
                                              const BasicConvWeights<T>& weights,
                                              ConvGeometry geometry,
                                              const BasicTensor<T>& upstream) {
  const Shape4 out_shape = checked_output_shape(input, offsets, weights, geometry);
  if (upstream.shape() != out_shape) {
    throw ShapeError("deformable_conv2d_backward: upstream " + to_string(upstream.shape()) +
                     " != output " + to_string(out_shape));
  }
  const int kh = weights.kh();
  const int kw = weights.kw();
  const int oh = out_shape.h;
  const int ow = out_shape.w;
  const std::size_t positions = out_shape.plane();

  DeformConvGrads<T> grads{
      BasicTensor<T>(input.shape()), BasicTensor<T>(offsets.shape()),
      BasicConvWeights<T>(weights.out_channels(), weights.in_channels(), kh, kw)};
  std::vector<T> columns;
  std::vector<T> grad_columns;
  for (int n = 0; n < input.n(); ++n) {
    deformable_im2col(input, offsets, n, kh, kw, geometry, oh, ow, columns);
    detail::columns_backward(weights, columns, positions, upstream.data().data() + upstream.index(n, 0, 0, 0),
                             grads.weights, grad_columns);
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const int tap = ky * kw + kx;
        for (int oy = 0; oy < oh; ++oy) {
          for (int ox = 0; ox < ow; ++ox) {
            const T sx = static_cast<T>(ox * geometry.stride - geometry.pad + kx) +
                         offsets.at(n, 2 * tap, oy, ox);
            const T sy = static_cast<T>(oy * geometry.stride - geometry.pad + ky) +
                         offsets.at(n, 2 * tap + 1, oy, ox);
            const std::size_t col = static_cast<std::size_t>(oy) * ow + ox;
            T g_dx = T(0);
            T g_dy = T(0);
            for (int c = 0; c < input.c(); ++c) {
              const std::size_t row = (static_cast<std::size_t>(c) * kh + ky) * kw + kx;
              const T g = grad_columns[row * positions + col];
              if (g == T(0)) continue;
              const auto s = bilinear_sample_with_grad(input.view(n, c), sx, sy);
              g_dx += g * s.d_dx;
              g_dy += g * s.d_dy;
              bilinear_scatter(grads.input.plane(n, c), input.h(), input.w(), sx, sy, g);
            }
            grads.offsets.at(n, 2 * tap, oy, ox) = g_dx;
            grads.offsets.at(n, 2 * tap + 1, oy, ox) = g_dy;
          }
        }
      }
    }
  }
  return grads;
}

template float bilinear_sample<float>(const PlaneView<float>&, float, float);
template double bilinear_sample<double>(const PlaneView<double>&, double, double);
template BilinearPositionGrad<float> bilinear_sample_with_grad<float>(const PlaneView<float>&, float, float);
template BilinearPositionGrad<double> bilinear_sample_with_grad<double>(const PlaneView<double>&, double, double);
template void bilinear_scatter<float>(std::span<float>, int, int, float, float, float);
template void bilinear_scatter<double>(std::span<double>, int, int, double, double, double);
template Tensor deformable_conv2d<float>(const Tensor&, const OffsetField&, const ConvWeights&, ConvGeometry);
template TensorD deformable_conv2d<double>(const TensorD&, const TensorD&, const BasicConvWeights<double>&, ConvGeometry);
template DeformConvGrads<float> deformable_conv2d_backward<float>(const Tensor&, const OffsetField&, const ConvWeights&, ConvGeometry, const Tensor&);
template DeformConvGrads<double> deformable_conv2d_backward<double>(const TensorD&, const TensorD&, const BasicConvWeights<double>&, ConvGeometry, const TensorD&);

}  // namespace tdet

#include "tdet/roi.hpp"

#include <algorithm>
#include <cmath>

#include "tdet/deform_conv.hpp"

namespace tdet {

namespace {

void check_roi(const Box& roi, int out_size) {
  if (!(roi.width() > 0.0f && roi.height() > 0.0f)) {
    throw std::invalid_argument("roi_extract: degenerate roi");
  }
  if (out_size < 1) throw std::invalid_argument("roi_extract: out_size must be >= 1");
}

struct CellGrid {
  double x0, y0, cell_w, cell_h, inv_stride;

  double fx(int j) const { return (x0 + (j + 0.5) * cell_w) * inv_stride - 0.5; }
  double fy(int i) const { return (y0 + (i + 0.5) * cell_h) * inv_stride - 0.5; }
};

CellGrid grid_for(const Box& roi, int out_size, int stride) {
  return {roi.xmin, roi.ymin, static_cast<double>(roi.width()) / out_size,
          static_cast<double>(roi.height()) / out_size, 1.0 / stride};
}

int checked_level(const Box& roi, const RoiLevelRule& rule, std::size_t levels,
                  const std::vector<int>& strides) {
  if (levels == 0 || strides.size() != levels) {
    throw ShapeError("roi_extract: need one stride per pyramid level");
  }
  const int level = roi_level(roi, rule);
  if (level < 0 || static_cast<std::size_t>(level) >= levels) {
    throw ShapeError("roi_extract: level rule selects a missing pyramid level");
  }
  return level;
}

}  // namespace

int roi_level(const Box& roi, const RoiLevelRule& rule) {
  const double size = std::sqrt(static_cast<double>(roi.width()) * roi.height());
  const double raw = std::floor(rule.canonical_level + std::log2(size / rule.canonical_size));
  return static_cast<int>(std::clamp(raw, static_cast<double>(rule.min_level),
                                     static_cast<double>(rule.max_level)));
}

template <std::floating_point T>
BasicTensor<T> roi_extract(const std::vector<BasicTensor<T>>& levels,
                           const std::vector<int>& strides, const Box& roi, int out_size,
                           const RoiLevelRule& rule) {
  check_roi(roi, out_size);
  const int level = checked_level(roi, rule, levels.size(), strides);
  const BasicTensor<T>& map = levels[static_cast<std::size_t>(level)];
  if (map.n() != 1) throw ShapeError("roi_extract: pyramid levels must have batch 1");
  const CellGrid grid = grid_for(roi, out_size, strides[static_cast<std::size_t>(level)]);
  BasicTensor<T> out(Shape4{1, map.c(), out_size, out_size});
  for (int c = 0; c < map.c(); ++c) {
    const PlaneView<T> plane = map.view(0, c);
    for (int i = 0; i < out_size; ++i) {
      const T y = static_cast<T>(grid.fy(i));
      for (int j = 0; j < out_size; ++j) {
        out.at(0, c, i, j) = bilinear_sample(plane, static_cast<T>(grid.fx(j)), y);
      }
    }
  }
  return out;
}

template <std::floating_point T>
void roi_extract_backward(const std::vector<int>& strides, const Box& roi, int out_size,
                          const RoiLevelRule& rule, const BasicTensor<T>& upstream,
                          std::vector<BasicTensor<T>>& grad_levels) {
  check_roi(roi, out_size);
  const int level = checked_level(roi, rule, grad_levels.size(), strides);
  BasicTensor<T>& grad = grad_levels[static_cast<std::size_t>(level)];
  if (upstream.shape() != Shape4{1, grad.c(), out_size, out_size}) {
    throw ShapeError("roi_extract_backward: upstream shape " + to_string(upstream.shape()));
  }
  const CellGrid grid = grid_for(roi, out_size, strides[static_cast<std::size_t>(level)]);
  for (int c = 0; c < grad.c(); ++c) {
    std::span<T> plane = grad.plane(0, c);
    for (int i = 0; i < out_size; ++i) {
      const T y = static_cast<T>(grid.fy(i));
      for (int j = 0; j < out_size; ++j) {
        bilinear_scatter(plane, grad.h(), grad.w(), static_cast<T>(grid.fx(j)), y,
                         upstream.at(0, c, i, j));
      }
    }
  }
}

template Tensor roi_extract<float>(const std::vector<Tensor>&, const std::vector<int>&, const Box&, int, const RoiLevelRule&);
template TensorD roi_extract<double>(const std::vector<TensorD>&, const std::vector<int>&, const Box&, int, const RoiLevelRule&);
template void roi_extract_backward<float>(const std::vector<int>&, const Box&, int, const RoiLevelRule&, const Tensor&, std::vector<Tensor>&);
template void roi_extract_backward<double>(const std::vector<int>&, const Box&, int, const RoiLevelRule&, const TensorD&, std::vector<TensorD>&);

}  // namespace tdet

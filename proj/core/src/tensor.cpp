#include "tdet/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace tdet {

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) +
         ", " + std::to_string(s.w) + ")";
}

template <std::floating_point T>
BasicTensor<T>::BasicTensor(Shape4 shape, T fill) : shape_(shape) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + to_string(shape));
  }
  data_.assign(shape.numel(), fill);
}

template <std::floating_point T>
BasicTensor<T>::BasicTensor(Shape4 shape, std::vector<T> data)
    : shape_(shape), data_(std::move(data)) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + to_string(shape));
  }
  if (data_.size() != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + to_string(shape));
  }
}

template <std::floating_point T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <std::floating_point T>
void BasicTensor<T>::add(const BasicTensor& other) {
  if (other.shape_ != shape_) {
    throw ShapeError("add: " + to_string(shape_) + " vs " + to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

template <std::floating_point T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace tdet

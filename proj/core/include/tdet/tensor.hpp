#pragma once

#include <concepts>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tdet {

// Raised on any dimension disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// (batch, channels, height, width).
struct Shape4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) *
           static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  std::size_t plane() const {
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  friend bool operator==(const Shape4&, const Shape4&) = default;
};

std::string to_string(const Shape4& s);

// Read-only view of one (height x width) channel plane.
template <std::floating_point T>
struct PlaneView {
  std::span<const T> data;
  int h = 0;
  int w = 0;

  T at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * static_cast<std::size_t>(w) +
                static_cast<std::size_t>(x)];
  }
  bool contains(int y, int x) const { return y >= 0 && y < h && x >= 0 && x < w; }
};

// Dense rank-4 array in row-major NCHW layout.
template <std::floating_point T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape4 shape, T fill = T(0));
  BasicTensor(Shape4 shape, std::vector<T> data);

  const Shape4& shape() const { return shape_; }
  int n() const { return shape_.n; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  std::size_t index(int n, int c, int y, int x) const {
    return ((static_cast<std::size_t>(n) * shape_.c + c) * shape_.h + y) * shape_.w + x;
  }
  T& at(int n, int c, int y, int x) { return data_[index(n, c, y, x)]; }
  T at(int n, int c, int y, int x) const { return data_[index(n, c, y, x)]; }

  std::span<T> plane(int n, int c) {
    return std::span<T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  std::span<const T> plane(int n, int c) const {
    return std::span<const T>(data_).subspan(index(n, c, 0, 0), shape_.plane());
  }
  PlaneView<T> view(int n, int c) const { return {plane(n, c), shape_.h, shape_.w}; }

  void fill(T value);
  // Elementwise this += other; shapes must match.
  void add(const BasicTensor& other);
  bool all_finite() const;

 private:
  Shape4 shape_{};
  std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

// Converts between precisions (used by gradient checking).
template <std::floating_point To, std::floating_point From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  std::vector<To> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = static_cast<To>(t.data()[i]);
  return BasicTensor<To>(t.shape(), std::move(out));
}

}  // namespace tdet

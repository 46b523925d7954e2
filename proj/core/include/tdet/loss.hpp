#pragma once

#include <array>
#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

namespace tdet::loss {

// Balance weight of the regression term and the smooth-L1 knee parameter.
struct LossConfig {
  double alpha = 1.0;
  double sigma = 3.0;

  void validate() const;
};

inline constexpr double kProbClamp = 1e-7;

template <std::floating_point T>
using Delta4 = std::array<T, 4>;

// -(1/n_f) * sum log(p* p + (1 - p*)(1 - p)), p clamped to [1e-7, 1 - 1e-7].
template <std::floating_point T>
T classification_loss(std::span<const T> p, std::span<const T> p_star, std::size_t n_f);

// 0.5 (sigma x)^2 for |x| < 1/sigma^2, |x| - 0.5/sigma^2 otherwise.
template <std::floating_point T>
T smooth_l1(T x, T sigma);

// sigma^2 x inside the knee, sign(x) outside.
template <std::floating_point T>
T smooth_l1_grad(T x, T sigma);

// (alpha / n_r) * sum_i p*_i * sum_k smooth_l1(t_ik - t*_ik).
template <std::floating_point T>
T regression_loss(std::span<const Delta4<T>> t, std::span<const Delta4<T>> t_star,
                  std::span<const T> p_star, std::size_t n_r, const LossConfig& config);

// One sampled minibatch for the joint loss. Entry i is a sampled anchor
// (or RoI) with predicted probability p[i], label p_star[i] and regression
// pair t[i] / t_star[i]; n_f and n_r normalise the two terms.
template <std::floating_point T>
struct BasicRpnBatch {
  std::vector<T> p;
  std::vector<T> p_star;
  std::vector<Delta4<T>> t;
  std::vector<Delta4<T>> t_star;
  std::size_t n_f = 1;
  std::size_t n_r = 1;

  void validate() const;
};
using RpnBatch = BasicRpnBatch<float>;

template <std::floating_point T>
struct LossResult {
  T total = 0;
  T classification = 0;
  T regression = 0;
  std::vector<T> grad_p;
  std::vector<Delta4<T>> grad_t;
};

template <std::floating_point T>
LossResult<T> total_loss(const BasicRpnBatch<T>& batch, const LossConfig& config);

// Mean categorical cross-entropy of row-wise softmax(logits) against labels;
// logits is rows x classes. Writes d loss / d logits into grad (same layout).
struct SoftmaxXentResult {
  double loss = 0.0;
  std::vector<float> grad;
};
SoftmaxXentResult softmax_cross_entropy(std::span<const float> logits, std::size_t classes,
                                        std::span<const int> labels);

}  // namespace tdet::loss

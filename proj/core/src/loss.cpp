#include "tdet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tdet::loss {

void LossConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("loss: alpha must be > 0");
  if (!(sigma > 0.0)) throw std::invalid_argument("loss: sigma must be > 0");
}

template <std::floating_point T>
void BasicRpnBatch<T>::validate() const {
  if (p.size() != p_star.size() || p.size() != t.size() || t.size() != t_star.size()) {
    throw std::invalid_argument("rpn batch: p, p_star, t, t_star lengths differ");
  }
  if (n_f < 1 || n_r < 1) throw std::invalid_argument("rpn batch: N_f and N_r must be >= 1");
}

template <std::floating_point T>
T classification_loss(std::span<const T> p, std::span<const T> p_star, std::size_t n_f) {
  if (p.size() != p_star.size()) {
    throw std::invalid_argument("classification_loss: p has " + std::to_string(p.size()) +
                                " entries, p_star " + std::to_string(p_star.size()));
  }
  if (n_f < 1) throw std::invalid_argument("classification_loss: N_f must be >= 1");
  const T lo = static_cast<T>(kProbClamp);
  const T hi = T(1) - lo;
  T sum = T(0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T q = std::clamp(p[i], lo, hi);
    sum += std::log(p_star[i] * q + (T(1) - p_star[i]) * (T(1) - q));
  }
  return -sum / static_cast<T>(n_f);
}

template <std::floating_point T>
T smooth_l1(T x, T sigma) {
  const T s2 = sigma * sigma;
  const T ax = std::abs(x);
  if (ax < T(1) / s2) return T(0.5) * s2 * x * x;
  return ax - T(0.5) / s2;
}

template <std::floating_point T>
T smooth_l1_grad(T x, T sigma) {
  const T s2 = sigma * sigma;
  if (std::abs(x) < T(1) / s2) return s2 * x;
  return x > T(0) ? T(1) : T(-1);
}

template <std::floating_point T>
T regression_loss(std::span<const Delta4<T>> t, std::span<const Delta4<T>> t_star,
                  std::span<const T> p_star, std::size_t n_r, const LossConfig& config) {
  config.validate();
  if (t.size() != t_star.size() || t.size() != p_star.size()) {
    throw std::invalid_argument("regression_loss: t, t_star, p_star lengths differ");
  }
  if (n_r < 1) throw std::invalid_argument("regression_loss: N_r must be >= 1");
  const T sigma = static_cast<T>(config.sigma);
  T sum = T(0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (p_star[i] == T(0)) continue;
    T inner = T(0);
    for (int k = 0; k < 4; ++k) inner += smooth_l1(t[i][k] - t_star[i][k], sigma);
    sum += p_star[i] * inner;
  }
  return static_cast<T>(config.alpha) * sum / static_cast<T>(n_r);
}

template <std::floating_point T>
LossResult<T> total_loss(const BasicRpnBatch<T>& batch, const LossConfig& config) {
  batch.validate();
  config.validate();
  LossResult<T> r;
  r.classification = classification_loss<T>(batch.p, batch.p_star, batch.n_f);
  r.regression = regression_loss<T>(batch.t, batch.t_star, batch.p_star, batch.n_r, config);
  r.total = r.classification + r.regression;

  const T lo = static_cast<T>(kProbClamp);
  const T hi = T(1) - lo;
  const T inv_f = T(1) / static_cast<T>(batch.n_f);
  r.grad_p.resize(batch.p.size());
  for (std::size_t i = 0; i < batch.p.size(); ++i) {
    const T p = batch.p[i];
    const T ps = batch.p_star[i];
    if (p < lo || p > hi) {
      r.grad_p[i] = T(0);  // flat region of the clamp
      continue;
    }
    r.grad_p[i] = -inv_f * (T(2) * ps - T(1)) / (ps * p + (T(1) - ps) * (T(1) - p));
  }

  const T sigma = static_cast<T>(config.sigma);
  const T scale = static_cast<T>(config.alpha) / static_cast<T>(batch.n_r);
  r.grad_t.resize(batch.t.size());
  for (std::size_t i = 0; i < batch.t.size(); ++i) {
    for (int k = 0; k < 4; ++k) {
      r.grad_t[i][k] =
          scale * batch.p_star[i] * smooth_l1_grad(batch.t[i][k] - batch.t_star[i][k], sigma);
    }
  }
  return r;
}

SoftmaxXentResult softmax_cross_entropy(std::span<const float> logits, std::size_t classes,
                                        std::span<const int> labels) {
  if (classes == 0 || logits.size() != labels.size() * classes) {
    throw std::invalid_argument("softmax_cross_entropy: logits/labels shape mismatch");
  }
  SoftmaxXentResult r;
  r.grad.resize(logits.size());
  const std::size_t rows = labels.size();
  if (rows == 0) return r;
  const double inv_rows = 1.0 / static_cast<double>(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const float* row = logits.data() + i * classes;
    const auto label = static_cast<std::size_t>(labels[i]);
    if (labels[i] < 0 || label >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label out of range");
    }
    double peak = row[0];
    for (std::size_t c = 1; c < classes; ++c) peak = std::max(peak, static_cast<double>(row[c]));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(row[c] - peak);
    const double log_total = std::log(total);
    r.loss -= (row[label] - peak - log_total) * inv_rows;
    for (std::size_t c = 0; c < classes; ++c) {
      const double prob = std::exp(row[c] - peak - log_total);
      r.grad[i * classes + c] =
          static_cast<float>((prob - (c == label ? 1.0 : 0.0)) * inv_rows);
    }
  }
  return r;
}

template struct BasicRpnBatch<float>;
template struct BasicRpnBatch<double>;
template float classification_loss<float>(std::span<const float>, std::span<const float>, std::size_t);
template double classification_loss<double>(std::span<const double>, std::span<const double>, std::size_t);
template float smooth_l1<float>(float, float);
template double smooth_l1<double>(double, double);
template float smooth_l1_grad<float>(float, float);
template double smooth_l1_grad<double>(double, double);
template float regression_loss<float>(std::span<const Delta4<float>>, std::span<const Delta4<float>>, std::span<const float>, std::size_t, const LossConfig&);
template double regression_loss<double>(std::span<const Delta4<double>>, std::span<const Delta4<double>>, std::span<const double>, std::size_t, const LossConfig&);
template LossResult<float> total_loss<float>(const BasicRpnBatch<float>&, const LossConfig&);
template LossResult<double> total_loss<double>(const BasicRpnBatch<double>&, const LossConfig&);

}  // namespace tdet::loss

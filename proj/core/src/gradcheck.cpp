#include "tdet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

#include "tdet/conv.hpp"
#include "tdet/deform_conv.hpp"
#include "tdet/loss.hpp"
#include "tdet/rng.hpp"
#include "tdet/roi.hpp"

namespace tdet {

namespace {

using Scalar = double;
using T4 = BasicTensor<Scalar>;
using W4 = BasicConvWeights<Scalar>;

constexpr double kKinkMargin = 1e-2;

struct ErrorTracker {
  double max_rel = 0.0;
  std::size_t checked = 0;

  void add(double analytic, double numeric) {
    const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric));
    max_rel = std::max(max_rel, rel);
    ++checked;
  }
};

void fill_uniform(std::span<Scalar> values, Rng& rng, double lo, double hi) {
  for (Scalar& v : values) v = rng.uniform(lo, hi);
}

// Perturbs each entry of `values` by +-eps and compares (L+ - L-) / 2eps with
// the analytic gradient.
void check_entries(std::span<Scalar> values, std::span<const Scalar> analytic, double eps,
                   const std::function<double()>& objective, ErrorTracker& tracker) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Scalar saved = values[i];
    values[i] = saved + eps;
    const double plus = objective();
    values[i] = saved - eps;
    const double minus = objective();
    values[i] = saved;
    tracker.add(analytic[i], (plus - minus) / (2.0 * eps));
  }
}

double dot(const T4& a, const T4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

// Value whose fractional part stays at least `margin` away from an integer.
double off_lattice(Rng& rng, double lo, double hi, double margin) {
  const double whole = std::floor(rng.uniform(lo, hi));
  return whole + rng.uniform(margin, 1.0 - margin);
}

struct ConvCase {
  T4 input;
  W4 weights;
  ConvGeometry geometry;
};

ConvCase random_conv_case(Rng& rng) {
  const int n = 1 + static_cast<int>(rng.below(2));
  const int in_c = 1 + static_cast<int>(rng.below(3));
  const int out_c = 1 + static_cast<int>(rng.below(3));
  const int k = rng.below(2) == 0 ? 1 : 3;
  const int h = 4 + static_cast<int>(rng.below(4));
  const int w = 4 + static_cast<int>(rng.below(4));
  ConvCase c{T4(Shape4{n, in_c, h, w}), W4(out_c, in_c, k, k),
             ConvGeometry{1 + static_cast<int>(rng.below(2)), static_cast<int>(rng.below(2))}};
  fill_uniform(c.input.data(), rng, -1.0, 1.0);
  fill_uniform(c.weights.weight.data(), rng, -1.0, 1.0);
  fill_uniform(c.weights.bias, rng, -1.0, 1.0);
  return c;
}

GradCheckReport check_conv2d(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 101));
  ErrorTracker tracker;
  for (int trial = 0; trial < 3; ++trial) {
    ConvCase c = random_conv_case(rng);
    T4 upstream(conv_output_shape(c.input.shape(), c.weights.out_channels(), c.weights.kh(),
                                  c.weights.kw(), c.geometry));
    if (!opt.zero_upstream) fill_uniform(upstream.data(), rng, -1.0, 1.0);
    const auto objective = [&] { return dot(conv2d(c.input, c.weights, c.geometry), upstream); };
    const ConvGrads<Scalar> g = conv2d_backward(c.input, c.weights, c.geometry, upstream);
    check_entries(c.input.data(), g.input.data(), opt.eps, objective, tracker);
    check_entries(c.weights.weight.data(), g.weights.weight.data(), opt.eps, objective, tracker);
    check_entries(c.weights.bias, g.weights.bias, opt.eps, objective, tracker);
  }
  return {"conv2d", tracker.max_rel, tracker.checked};
}

GradCheckReport check_deformable(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 102));
  ErrorTracker tracker;
  const double margin = std::max(kKinkMargin, 2.0 * opt.eps);
  for (int trial = 0; trial < 3; ++trial) {
    ConvCase c = random_conv_case(rng);
    const Shape4 out = conv_output_shape(c.input.shape(), c.weights.out_channels(),
                                         c.weights.kh(), c.weights.kw(), c.geometry);
    T4 offsets(Shape4{out.n, 2 * c.weights.kh() * c.weights.kw(), out.h, out.w});
    for (Scalar& v : offsets.data()) v = off_lattice(rng, -2.0, 2.0, margin);
    T4 upstream(out);
    if (!opt.zero_upstream) fill_uniform(upstream.data(), rng, -1.0, 1.0);
    const auto objective = [&] {
      return dot(deformable_conv2d(c.input, offsets, c.weights, c.geometry), upstream);
    };
    const DeformConvGrads<Scalar> g =
        deformable_conv2d_backward(c.input, offsets, c.weights, c.geometry, upstream);
    check_entries(c.input.data(), g.input.data(), opt.eps, objective, tracker);
    check_entries(offsets.data(), g.offsets.data(), opt.eps, objective, tracker);
    check_entries(c.weights.weight.data(), g.weights.weight.data(), opt.eps, objective, tracker);
    check_entries(c.weights.bias, g.weights.bias, opt.eps, objective, tracker);
  }
  return {"deformable_conv2d", tracker.max_rel, tracker.checked};
}

GradCheckReport check_roi_extract(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 103));
  ErrorTracker tracker;
  const std::vector<int> strides{4, 8, 16};
  const RoiLevelRule rule{1, 32.0f, 0, 2};
  for (int trial = 0; trial < 4; ++trial) {
    std::vector<T4> levels;
    for (int s : strides) {
      levels.emplace_back(Shape4{1, 2, 64 / s, 64 / s});
      fill_uniform(levels.back().data(), rng, -1.0, 1.0);
    }
    const float x0 = static_cast<float>(rng.uniform(0.0, 40.0));
    const float y0 = static_cast<float>(rng.uniform(0.0, 40.0));
    const float side = static_cast<float>(rng.uniform(8.0, 60.0));
    const Box roi{x0, y0, x0 + side, y0 + static_cast<float>(rng.uniform(0.5, 1.5)) * side};
    const int out_size = 3 + static_cast<int>(rng.below(3));
    T4 upstream(Shape4{1, 2, out_size, out_size});
    if (!opt.zero_upstream) fill_uniform(upstream.data(), rng, -1.0, 1.0);
    const auto objective = [&] {
      return dot(roi_extract(levels, strides, roi, out_size, rule), upstream);
    };
    std::vector<T4> grads;
    for (const T4& l : levels) grads.emplace_back(l.shape());
    roi_extract_backward(strides, roi, out_size, rule, upstream, grads);
    for (std::size_t l = 0; l < levels.size(); ++l) {
      check_entries(levels[l].data(), grads[l].data(), opt.eps, objective, tracker);
    }
  }
  return {"roi_extract", tracker.max_rel, tracker.checked};
}

// Draws x with | |x| - knee | >= margin.
double away_from_knee(Rng& rng, double knee, double margin) {
  for (;;) {
    const double x = rng.uniform(-1.0, 1.0);
    if (std::abs(std::abs(x) - knee) >= margin) return x;
  }
}

GradCheckReport check_smooth_l1(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 104));
  ErrorTracker tracker;
  const double sigma = 3.0;
  const double knee = 1.0 / (sigma * sigma);
  const double margin = std::max(1e-3, 2.0 * opt.eps);
  std::vector<Scalar> xs(64);
  std::vector<Scalar> weights(xs.size());
  for (Scalar& x : xs) x = away_from_knee(rng, knee, margin);
  for (Scalar& w : weights) w = opt.zero_upstream ? 0.0 : rng.uniform(-1.0, 1.0);
  const auto objective = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += weights[i] * loss::smooth_l1(xs[i], sigma);
    return s;
  };
  std::vector<Scalar> analytic(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    analytic[i] = weights[i] * loss::smooth_l1_grad(xs[i], sigma);
  }
  check_entries(xs, analytic, opt.eps, objective, tracker);
  return {"smooth_l1", tracker.max_rel, tracker.checked};
}

GradCheckReport check_total_loss(const GradCheckOptions& opt) {
  Rng rng(derive_seed(opt.seed, 105));
  ErrorTracker tracker;
  loss::LossConfig config;
  const double knee = 1.0 / (config.sigma * config.sigma);
  const double margin = std::max(1e-3, 2.0 * opt.eps);
  for (int trial = 0; trial < 4; ++trial) {
    loss::BasicRpnBatch<Scalar> batch;
    const std::size_t n = 8 + rng.below(25);
    for (std::size_t i = 0; i < n; ++i) {
      // log p has third derivative 2/p^3: keep the O(eps^2) stencil error small.
      batch.p.push_back(rng.uniform(0.2, 0.8));
      batch.p_star.push_back(rng.below(2) == 0 ? 0.0 : 1.0);
      loss::Delta4<Scalar> t{};
      loss::Delta4<Scalar> ts{};
      for (int k = 0; k < 4; ++k) {
        ts[k] = rng.uniform(-0.5, 0.5);
        t[k] = ts[k] + away_from_knee(rng, knee, margin);
      }
      batch.t.push_back(t);
      batch.t_star.push_back(ts);
    }
    batch.n_f = n;
    batch.n_r = n;
    // Scales the loss by 0 or 1 so the zero-upstream contract is checkable.
    const double upstream = opt.zero_upstream ? 0.0 : 1.0;
    const auto objective = [&] { return upstream * loss::total_loss(batch, config).total; };
    const loss::LossResult<Scalar> r = loss::total_loss(batch, config);
    std::vector<Scalar> grad_p(r.grad_p);
    for (Scalar& g : grad_p) g *= upstream;
    check_entries(batch.p, grad_p, opt.eps, objective, tracker);
    std::vector<Scalar> t_flat;
    std::vector<Scalar> grad_t;
    for (std::size_t i = 0; i < n; ++i) {
      for (int k = 0; k < 4; ++k) {
        t_flat.push_back(batch.t[i][k]);
        grad_t.push_back(upstream * r.grad_t[i][k]);
      }
    }
    const auto t_objective = [&] {
      for (std::size_t i = 0; i < n; ++i) {
        for (int k = 0; k < 4; ++k) batch.t[i][k] = t_flat[i * 4 + k];
      }
      return objective();
    };
    check_entries(t_flat, grad_t, opt.eps, t_objective, tracker);
  }
  return {"total_loss", tracker.max_rel, tracker.checked};
}

}  // namespace

const std::vector<std::string>& gradcheck_ops() {
  static const std::vector<std::string> ops{"conv2d", "deformable_conv2d", "roi_extract",
                                            "smooth_l1", "total_loss"};
  return ops;
}

GradCheckReport finite_diff_check(std::string_view op, const GradCheckOptions& options) {
  if (!(options.eps > 0.0 && options.eps <= kMaxGradCheckEps)) {
    throw std::invalid_argument("finite_diff_check: eps must be in (0, 0.1]");
  }
  if (op == "conv2d") return check_conv2d(options);
  if (op == "deformable_conv2d") return check_deformable(options);
  if (op == "roi_extract") return check_roi_extract(options);
  if (op == "smooth_l1") return check_smooth_l1(options);
  if (op == "total_loss") return check_total_loss(options);
  throw std::invalid_argument("finite_diff_check: unknown operator '" + std::string(op) + "'");
}

}  // namespace tdet

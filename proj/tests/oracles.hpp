// Independent reference implementations used as test oracles. They follow
// the textbook definitions directly and share no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "tdet/boxes.hpp"
#include "tdet/conv.hpp"
#include "tdet/nms.hpp"
#include "tdet/tensor.hpp"

namespace oracle {

// Direct six-loop convolution, accumulated in double.
template <typename T>
tdet::BasicTensor<T> conv2d(const tdet::BasicTensor<T>& x, const tdet::BasicConvWeights<T>& w,
                            const tdet::ConvGeometry& g) {
  const int kh = w.kh(), kw = w.kw();
  const int oh = (x.h() + 2 * g.pad - kh) / g.stride + 1;
  const int ow = (x.w() + 2 * g.pad - kw) / g.stride + 1;
  tdet::BasicTensor<T> y(tdet::Shape4{x.n(), w.out_channels(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < w.out_channels(); ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = w.bias[static_cast<std::size_t>(o)];
          for (int c = 0; c < x.c(); ++c)
            for (int u = 0; u < kh; ++u)
              for (int v = 0; v < kw; ++v) {
                const int r = i * g.stride - g.pad + u;
                const int q = j * g.stride - g.pad + v;
                if (r < 0 || q < 0 || r >= x.h() || q >= x.w()) continue;
                s += static_cast<double>(w.weight.at(o, c, u, v)) * x.at(n, c, r, q);
              }
          y.at(n, o, i, j) = static_cast<T>(s);
        }
  return y;
}

// G(q, p) = g(qx, px) g(qy, py), g(a, b) = max(0, 1 - |a - b|), summed over
// every in-bounds integer location q; exterior samples are zero.
template <typename T>
double bilinear_g(const tdet::BasicTensor<T>& x, int n, int c, double px, double py) {
  double s = 0.0;
  for (int qy = 0; qy < x.h(); ++qy) {
    const double gy = std::max(0.0, 1.0 - std::abs(qy - py));
    if (gy == 0.0) continue;
    for (int qx = 0; qx < x.w(); ++qx) {
      const double gx = std::max(0.0, 1.0 - std::abs(qx - px));
      if (gx != 0.0) s += gx * gy * x.at(n, c, qy, qx);
    }
  }
  return s;
}

// y(p0) = sum_k w(p_k) x(p0 + p_k + dp_k) evaluated term by term.
// Offsets: channel 2k = dx, 2k+1 = dy for tap k = ky * kw + kx.
template <typename T>
tdet::BasicTensor<T> deformable_conv2d(const tdet::BasicTensor<T>& x,
                                       const tdet::BasicTensor<T>& offsets,
                                       const tdet::BasicConvWeights<T>& w,
                                       const tdet::ConvGeometry& g) {
  const int kh = w.kh(), kw = w.kw();
  const int oh = (x.h() + 2 * g.pad - kh) / g.stride + 1;
  const int ow = (x.w() + 2 * g.pad - kw) / g.stride + 1;
  tdet::BasicTensor<T> y(tdet::Shape4{x.n(), w.out_channels(), oh, ow});
  for (int n = 0; n < x.n(); ++n)
    for (int o = 0; o < w.out_channels(); ++o)
      for (int i = 0; i < oh; ++i)
        for (int j = 0; j < ow; ++j) {
          double s = w.bias[static_cast<std::size_t>(o)];
          for (int u = 0; u < kh; ++u)
            for (int v = 0; v < kw; ++v) {
              const int k = u * kw + v;
              const double px = j * g.stride - g.pad + v + offsets.at(n, 2 * k, i, j);
              const double py = i * g.stride - g.pad + u + offsets.at(n, 2 * k + 1, i, j);
              for (int c = 0; c < x.c(); ++c) {
                s += static_cast<double>(w.weight.at(o, c, u, v)) * bilinear_g(x, n, c, px, py);
              }
            }
          y.at(n, o, i, j) = static_cast<T>(s);
        }
  return y;
}

// Float IoU written out from the definition; exact for integer corners, so
// threshold comparisons agree bit for bit with any exact implementation.
inline float box_iou(const tdet::Box& a, const tdet::Box& b) {
  const float iw = std::max(0.0f, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
  const float ih = std::max(0.0f, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
  const float inter = iw * ih;
  const float ua = (a.xmax - a.xmin) * (a.ymax - a.ymin) + (b.xmax - b.xmin) * (b.ymax - b.ymin) -
                   inter;
  return ua > 0.0f ? inter / ua : 0.0f;
}

// O(n^2) greedy NMS: walk detections by score (stable), keep one unless a
// kept detection of the same class overlaps it by more than `thresh`.
inline std::vector<std::size_t> nms(const std::vector<tdet::Detection>& d, float thresh) {
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a].score > d[b].score; });
  std::vector<std::size_t> kept;
  for (const std::size_t i : order) {
    bool keep = true;
    for (const std::size_t k : kept) {
      if (d[k].class_id == d[i].class_id && box_iou(d[k].box, d[i].box) > thresh) keep = false;
    }
    if (keep) kept.push_back(i);
  }
  return kept;
}

// AP = sum_i (R_i - R_{i-1}) * max_{j >= i} P_j over the score ranking
// (stable for ties), with the max taken by brute force.
inline double average_precision(const std::vector<bool>& flags, const std::vector<float>& scores,
                                std::size_t n_gt) {
  std::vector<std::size_t> order(flags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<double> precision, recall;
  double tp = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    tp += flags[order[r]] ? 1.0 : 0.0;
    precision.push_back(tp / static_cast<double>(r + 1));
    recall.push_back(tp / static_cast<double>(n_gt));
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    double best = 0.0;
    for (std::size_t j = i; j < precision.size(); ++j) best = std::max(best, precision[j]);
    ap += (recall[i] - prev_recall) * best;
    prev_recall = recall[i];
  }
  return ap;
}

}  // namespace oracle

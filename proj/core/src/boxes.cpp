#include "tdet/boxes.hpp"

#include <algorithm>
#include <cmath>

namespace tdet {

float iou(const Box& a, const Box& b) {
  const float iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const float ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0.0f || ih <= 0.0f) return 0.0f;
  const float inter = iw * ih;
  const float uni = a.area() + b.area() - inter;
  if (uni <= 0.0f) return 0.0f;
  return std::clamp(inter / uni, 0.0f, 1.0f);
}

Box clip_box(const Box& b, float width, float height) {
  return {std::clamp(b.xmin, 0.0f, width), std::clamp(b.ymin, 0.0f, height),
          std::clamp(b.xmax, 0.0f, width), std::clamp(b.ymax, 0.0f, height)};
}

BoxDelta encode_box(const Box& anchor, const Box& gt) {
  if (!(gt.width() > 0.0f && gt.height() > 0.0f)) {
    throw std::invalid_argument("encode_box: ground truth must have positive width and height");
  }
  if (!(anchor.width() > 0.0f && anchor.height() > 0.0f)) {
    throw std::invalid_argument("encode_box: anchor must have positive width and height");
  }
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double ax = 0.5 * (static_cast<double>(anchor.xmin) + anchor.xmax);
  const double ay = 0.5 * (static_cast<double>(anchor.ymin) + anchor.ymax);
  const double gx = 0.5 * (static_cast<double>(gt.xmin) + gt.xmax);
  const double gy = 0.5 * (static_cast<double>(gt.ymin) + gt.ymax);
  return {static_cast<float>((gx - ax) / aw), static_cast<float>((gy - ay) / ah),
          static_cast<float>(std::log(gt.width() / aw)),
          static_cast<float>(std::log(gt.height() / ah))};
}

Box decode_box(const Box& anchor, const BoxDelta& t) {
  // exp() argument bounded so wild early-training deltas stay finite.
  constexpr double kMaxLogScale = 4.135;  // ln(1000/16)
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double ax = 0.5 * (static_cast<double>(anchor.xmin) + anchor.xmax);
  const double ay = 0.5 * (static_cast<double>(anchor.ymin) + anchor.ymax);
  const double cx = ax + t[0] * aw;
  const double cy = ay + t[1] * ah;
  const double w = aw * std::exp(std::min<double>(t[2], kMaxLogScale));
  const double h = ah * std::exp(std::min<double>(t[3], kMaxLogScale));
  return {static_cast<float>(cx - 0.5 * w), static_cast<float>(cy - 0.5 * h),
          static_cast<float>(cx + 0.5 * w), static_cast<float>(cy + 0.5 * h)};
}

}  // namespace tdet

#pragma once

#include <array>
#include <stdexcept>

namespace tdet {

// Axis-aligned box in continuous pixel coordinates; min edges inclusive,
// max edges exclusive.
struct Box {
  float xmin = 0.0f;
  float ymin = 0.0f;
  float xmax = 0.0f;
  float ymax = 0.0f;

  float width() const { return xmax - xmin; }
  float height() const { return ymax - ymin; }
  float area() const { return width() > 0.0f && height() > 0.0f ? width() * height() : 0.0f; }
  float cx() const { return 0.5f * (xmin + xmax); }
  float cy() const { return 0.5f * (ymin + ymax); }
  bool valid() const { return xmin < xmax && ymin < ymax; }
  friend bool operator==(const Box&, const Box&) = default;
};

struct BoxAnnotation {
  int class_id = 0;
  Box box;
  friend bool operator==(const BoxAnnotation&, const BoxAnnotation&) = default;
};

// Intersection over union in [0, 1]; 0 for disjoint or empty boxes.
float iou(const Box& a, const Box& b);

Box clip_box(const Box& b, float width, float height);

// Regression target of `gt` relative to `anchor`:
// ((gx - ax) / aw, (gy - ay) / ah, ln(gw / aw), ln(gh / ah)).
using BoxDelta = std::array<float, 4>;
BoxDelta encode_box(const Box& anchor, const Box& gt);
Box decode_box(const Box& anchor, const BoxDelta& t);

}  // namespace tdet

#pragma once

#include <vector>

#include "tdet/image.hpp"
#include "tdet/nms.hpp"

namespace tdet {

// RGB copy of `image` with a 1-px outline per detection and its class id
// drawn in a 3x5 digit font just inside the top-left corner. Gray inputs
// are expanded to RGB.
Image render_overlay(const Image& image, const std::vector<Detection>& dets);

}  // namespace tdet

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tdet {

// Named view of one trainable tensor and its gradient accumulator.
struct ParamRef {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<float> value;
  std::span<float> grad;
};

}  // namespace tdet

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdet/model.hpp"
#include "tdet/params.hpp"

namespace tdet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[4] = {'T', 'D', 'E', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

// Layout (all little-endian): magic "TDET", u32 version, u32 count, then per
// tensor u16 name length, UTF-8 name, u8 rank, u32 dims[rank], f32 data.
std::string encode_checkpoint(const std::vector<ParamRef>& params);
std::vector<NamedTensor> decode_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const std::vector<ParamRef>& params);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

// Architecture recovered from parameter names and shapes.
model::ModelConfig infer_model_config(const std::vector<NamedTensor>& tensors);

// Copies tensors into the detector; names and dims must match exactly.
void load_parameters(model::Detector& detector, const std::vector<NamedTensor>& tensors);

model::Detector detector_from_checkpoint(const std::filesystem::path& path);

}  // namespace tdet

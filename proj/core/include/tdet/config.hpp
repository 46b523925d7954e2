#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tdet/eval.hpp"
#include "tdet/loss.hpp"
#include "tdet/model.hpp"
#include "tdet/turbulence.hpp"

namespace tdet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ToyConfig {
  int train_images = 400;
  int test_images = 100;
  int image_size = 64;
};

struct TrainConfig {
  int steps = 2000;
  double lr = 1e-4;
  int rpn_batch = 64;
  int head_batch = 32;
  int log_every = 0;  // progress lines on stderr; 0 = silent
};

struct DetectConfig {
  float score_thresh = 0.05f;
  float nms_iou = 0.5f;
  int max_dets = 100;
};

// Every setting a run can take. Serialises to flat `key=value` text; the
// canonical text is what the config hash covers.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path data_dir;
  std::filesystem::path out_dir;
  std::filesystem::path checkpoint;
  std::filesystem::path detections;
  turbulence::DegradeConfig degrade;  // degrade.seed is derived, not a key
  model::ModelConfig model;
  loss::LossConfig loss;
  ToyConfig toy;
  TrainConfig train;
  DetectConfig detect;
  eval::EvalOptions eval;
  double gradcheck_eps = 1e-3;

  // Applies one `key=value` setting; unknown keys and bad values throw ConfigError.
  void set(std::string_view key, std::string_view value);
  // Range checks across all fields; throws ConfigError.
  void validate() const;
  // Canonical serialisation, every key in fixed order. Without paths the
  // text describes what a run computes, independent of where files live.
  std::string to_text(bool include_paths = true) const;

  static const std::vector<std::string>& keys();
};

// Parses `key=value` lines on top of defaults. Blank lines and lines starting
// with '#' are skipped. Errors carry the line number.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);
// Hash of the path-free canonical text.
std::uint64_t config_hash(const RunConfig& config);
std::string hex64(std::uint64_t value);

}  // namespace tdet

#include "tdet/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "tdet/gradcheck.hpp"

namespace tdet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for key '" + std::string(key) +
                    "'");
}

template <typename T>
T parse_int(std::string_view key, std::string_view value) {
  T out{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  // from_chars for floating point is available in libstdc++ 11.
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size() || !std::isfinite(out)) {
    bad_value(key, value);
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  bad_value(key, value);
}

std::string fmt_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field int_field(T RunConfig::*outer) {
  return {[outer](RunConfig& c, std::string_view k, std::string_view v) {
            c.*outer = parse_int<T>(k, v);
          },
          [outer](const RunConfig& c) { return std::to_string(c.*outer); }};
}

// Accessor-based fields for nested structs.
template <typename Get>
Field int_ref(Get get) {
  return {[get](RunConfig& c, std::string_view k, std::string_view v) {
            auto& ref = get(c);
            ref = parse_int<std::remove_reference_t<decltype(ref)>>(k, v);
          },
          [get](const RunConfig& c) { return std::to_string(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field double_ref(Get get) {
  return {[get](RunConfig& c, std::string_view k, std::string_view v) {
            get(c) = static_cast<std::remove_reference_t<decltype(get(c))>>(parse_double(k, v));
          },
          [get](const RunConfig& c) { return fmt_double(get(const_cast<RunConfig&>(c))); }};
}

template <typename Get>
Field bool_ref(Get get) {
  return {[get](RunConfig& c, std::string_view k, std::string_view v) { get(c) = parse_bool(k, v); },
          [get](const RunConfig& c) {
            return std::string(get(const_cast<RunConfig&>(c)) ? "on" : "off");
          }};
}

template <typename Get>
Field path_ref(Get get) {
  return {[get](RunConfig& c, std::string_view, std::string_view v) {
            get(c) = std::filesystem::path(std::string(v));
          },
          [get](const RunConfig& c) { return get(const_cast<RunConfig&>(c)).string(); }};
}

const std::vector<std::pair<std::string, Field>>& field_table() {
  static const std::vector<std::pair<std::string, Field>> table{
      {"seed", int_field(&RunConfig::seed)},
      {"data_dir", path_ref([](RunConfig& c) -> auto& { return c.data_dir; })},
      {"out_dir", path_ref([](RunConfig& c) -> auto& { return c.out_dir; })},
      {"checkpoint", path_ref([](RunConfig& c) -> auto& { return c.checkpoint; })},
      {"detections", path_ref([](RunConfig& c) -> auto& { return c.detections; })},
      {"degrade.max_displacement",
       double_ref([](RunConfig& c) -> auto& { return c.degrade.max_displacement; })},
      {"degrade.cell_size", int_ref([](RunConfig& c) -> auto& { return c.degrade.cell_size; })},
      {"degrade.psf_sigma_min",
       double_ref([](RunConfig& c) -> auto& { return c.degrade.psf_sigma_min; })},
      {"degrade.psf_sigma_max",
       double_ref([](RunConfig& c) -> auto& { return c.degrade.psf_sigma_max; })},
      {"degrade.psf_radius_min",
       double_ref([](RunConfig& c) -> auto& { return c.degrade.psf_radius_min; })},
      {"degrade.psf_radius_max",
       double_ref([](RunConfig& c) -> auto& { return c.degrade.psf_radius_max; })},
      {"degrade.noise_sigma",
       double_ref([](RunConfig& c) -> auto& { return c.degrade.noise_sigma; })},
      {"degrade.tile_size", int_ref([](RunConfig& c) -> auto& { return c.degrade.tile_size; })},
      {"model.num_classes", int_ref([](RunConfig& c) -> auto& { return c.model.num_classes; })},
      {"model.deformable", bool_ref([](RunConfig& c) -> auto& { return c.model.deformable; })},
      {"model.fpn", bool_ref([](RunConfig& c) -> auto& { return c.model.fpn; })},
      {"loss.alpha", double_ref([](RunConfig& c) -> auto& { return c.loss.alpha; })},
      {"loss.sigma", double_ref([](RunConfig& c) -> auto& { return c.loss.sigma; })},
      {"toy.train_images", int_ref([](RunConfig& c) -> auto& { return c.toy.train_images; })},
      {"toy.test_images", int_ref([](RunConfig& c) -> auto& { return c.toy.test_images; })},
      {"toy.image_size", int_ref([](RunConfig& c) -> auto& { return c.toy.image_size; })},
      {"train.steps", int_ref([](RunConfig& c) -> auto& { return c.train.steps; })},
      {"train.lr", double_ref([](RunConfig& c) -> auto& { return c.train.lr; })},
      {"train.rpn_batch", int_ref([](RunConfig& c) -> auto& { return c.train.rpn_batch; })},
      {"train.head_batch", int_ref([](RunConfig& c) -> auto& { return c.train.head_batch; })},
      {"train.log_every", int_ref([](RunConfig& c) -> auto& { return c.train.log_every; })},
      {"detect.score_thresh",
       double_ref([](RunConfig& c) -> auto& { return c.detect.score_thresh; })},
      {"detect.nms_iou", double_ref([](RunConfig& c) -> auto& { return c.detect.nms_iou; })},
      {"detect.max_dets", int_ref([](RunConfig& c) -> auto& { return c.detect.max_dets; })},
      {"eval.iou_thresh", double_ref([](RunConfig& c) -> auto& { return c.eval.iou_thresh; })},
      {"eval.score_thresh", double_ref([](RunConfig& c) -> auto& { return c.eval.score_thresh; })},
      {"eval.max_dets",
       int_ref([](RunConfig& c) -> auto& { return c.eval.max_dets_per_image; })},
      {"gradcheck.eps", double_ref([](RunConfig& c) -> auto& { return c.gradcheck_eps; })},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, field] : field_table()) out.push_back(name);
    return out;
  }();
  return names;
}

void RunConfig::set(std::string_view key, std::string_view value) {
  for (const auto& [name, field] : field_table()) {
    if (name == key) {
      field.set(*this, key, trim(value));
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void RunConfig::validate() const {
  try {
    degrade.validate();
    model.validate();
    loss.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(toy.train_images >= 0 && toy.test_images >= 0, "toy image counts must be >= 0");
  require(toy.image_size >= 48, "toy.image_size must be >= 48");
  require(train.steps >= 1, "train.steps must be >= 1");
  require(train.lr >= 0.0, "train.lr must be >= 0");
  require(train.rpn_batch >= 2 && train.head_batch >= 2, "train batch sizes must be >= 2");
  require(train.log_every >= 0, "train.log_every must be >= 0");
  require(detect.score_thresh >= 0.0f && detect.score_thresh <= 1.0f,
          "detect.score_thresh must be in [0, 1]");
  require(detect.nms_iou > 0.0f && detect.nms_iou <= 1.0f, "detect.nms_iou must be in (0, 1]");
  require(detect.max_dets >= 1, "detect.max_dets must be >= 1");
  require(eval.iou_thresh > 0.0f && eval.iou_thresh <= 1.0f, "eval.iou_thresh must be in (0, 1]");
  require(eval.score_thresh >= 0.0f && eval.score_thresh <= 1.0f,
          "eval.score_thresh must be in [0, 1]");
  require(eval.max_dets_per_image >= 1, "eval.max_dets must be >= 1");
  require(gradcheck_eps > 0.0 && gradcheck_eps <= kMaxGradCheckEps,
          "gradcheck.eps must be in (0, 0.1]");
}

std::string RunConfig::to_text(bool include_paths) const {
  static const std::set<std::string, std::less<>> path_keys{"data_dir", "out_dir", "checkpoint",
                                                            "detections"};
  std::string out;
  for (const auto& [name, field] : field_table()) {
    if (!include_paths && path_keys.count(name) != 0) continue;
    out += name;
    out += '=';
    out += field.get(*this);
    out += '\n';
  }
  return out;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      base.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t config_hash(const RunConfig& config) { return fnv1a64(config.to_text(false)); }

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

}  // namespace tdet

#include "tdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace tdet {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void put(std::string& out, U value) {
  char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  out.append(bytes, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return value;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

bool has(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

const NamedTensor& find(const std::vector<NamedTensor>& tensors, const std::string& name) {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return t;
  }
  throw CheckpointError("checkpoint is missing tensor " + name);
}

}  // namespace

std::string encode_checkpoint(const std::vector<ParamRef>& params) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const ParamRef& p : params) {
    if (p.name.size() > UINT16_MAX) throw CheckpointError("parameter name too long");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(p.name.size()));
    out += p.name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(p.dims.size()));
    for (std::uint32_t d : p.dims) put<std::uint32_t>(out, d);
    for (float v : p.value) put<float>(out, v);
  }
  return out;
}

std::vector<NamedTensor> decode_checkpoint(const std::string& bytes) {
  Reader in(bytes);
  if (in.take(4) != std::string(kCheckpointMagic, 4)) throw CheckpointError("bad checkpoint magic");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>();
  std::vector<NamedTensor> tensors;
  std::map<std::string, int> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = in.take(in.get<std::uint16_t>());
    if (seen[t.name]++ > 0) throw CheckpointError("duplicate tensor " + t.name);
    const auto rank = in.get<std::uint8_t>();
    std::uint64_t numel = 1;
    for (std::uint8_t r = 0; r < rank; ++r) {
      t.dims.push_back(in.get<std::uint32_t>());
      numel *= t.dims.back();
      if (numel > (std::uint64_t{1} << 28)) throw CheckpointError("tensor too large: " + t.name);
    }
    t.data.resize(numel);
    for (float& v : t.data) v = in.get<float>();
    tensors.push_back(std::move(t));
  }
  if (!in.done()) throw CheckpointError("trailing bytes after checkpoint");
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<ParamRef>& params) {
  const std::string bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed: " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return decode_checkpoint(buffer.str());
}

model::ModelConfig infer_model_config(const std::vector<NamedTensor>& tensors) {
  model::ModelConfig config;
  config.fpn = has(tensors, "fpn.lateral2.weight");
  if (!config.fpn && !has(tensors, "neck.lateral.weight")) {
    throw CheckpointError("checkpoint has neither fpn nor neck parameters");
  }
  config.deformable = has(tensors, "backbone.stage2a.offset.weight");
  const NamedTensor& cls_bias = find(tensors, "head.cls.bias");
  if (cls_bias.data.size() < 2) throw CheckpointError("head.cls.bias too small");
  config.num_classes = static_cast<int>(cls_bias.data.size()) - 1;
  const NamedTensor& fc_bias = find(tensors, "head.fc.bias");
  config.head_hidden = static_cast<int>(fc_bias.data.size());
  const NamedTensor& smooth = find(tensors, config.fpn ? "fpn.smooth2.bias" : "neck.smooth.bias");
  config.pyramid_width = static_cast<int>(smooth.data.size());
  const NamedTensor& fc_w = find(tensors, "head.fc.weight");
  if (fc_w.dims.size() != 2 || config.pyramid_width == 0) {
    throw CheckpointError("head.fc.weight must be rank 2");
  }
  const auto area = fc_w.dims[1] / static_cast<std::uint32_t>(config.pyramid_width);
  int side = 1;
  while (static_cast<std::uint32_t>(side * side) < area) ++side;
  if (static_cast<std::uint32_t>(side * side) != area) {
    throw CheckpointError("head.fc.weight input width is not width * roi^2");
  }
  config.roi_size = side;
  const NamedTensor& rpn_cls = find(tensors, "rpn.cls.bias");
  if (static_cast<int>(rpn_cls.data.size()) != config.anchors_per_location()) {
    throw CheckpointError("rpn.cls.bias does not match the anchor layout");
  }
  return config;
}

void load_parameters(model::Detector& detector, const std::vector<NamedTensor>& tensors) {
  std::vector<ParamRef> params = detector.parameters();
  if (params.size() != tensors.size()) {
    throw CheckpointError("checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  }
  for (ParamRef& p : params) {
    const NamedTensor& t = find(tensors, p.name);
    if (t.dims != p.dims || t.data.size() != p.value.size()) {
      throw CheckpointError("shape mismatch for " + p.name);
    }
    std::copy(t.data.begin(), t.data.end(), p.value.begin());
  }
}

model::Detector detector_from_checkpoint(const std::filesystem::path& path) {
  const std::vector<NamedTensor> tensors = load_checkpoint(path);
  model::Detector detector(infer_model_config(tensors), 0);
  load_parameters(detector, tensors);
  return detector;
}

}  // namespace tdet

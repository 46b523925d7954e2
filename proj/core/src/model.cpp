#include "tdet/model.hpp"

#include <cmath>
#include <stdexcept>

#include "tdet/activations.hpp"
#include "tdet/deform_conv.hpp"
#include "tdet/gemm.hpp"
#include "tdet/rng.hpp"

namespace tdet::model {

namespace {

constexpr int kStageStrides[] = {4, 8, 16};
constexpr int kStageChannels[] = {16, 32, 64};
// Backbone layer indices whose outputs are the three stage features.
constexpr std::size_t kStageOutputs[] = {2, 4, 6};

ParamRef make_ref(const std::string& name, std::vector<std::uint32_t> dims, std::span<float> value,
                  std::span<float> grad) {
  return {name, std::move(dims), value, grad};
}

std::vector<std::uint32_t> dims_of(const Shape4& s) {
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
}

void fill_normal(std::span<float> values, Rng& rng, double stddev) {
  for (float& v : values) v = static_cast<float>(stddev * rng.normal());
}

MaybeDeformableConv make_block(const std::string& name, int in, int out, int stride,
                               bool deformable) {
  MaybeDeformableConv block{ConvLayer(name, in, out, 3, stride, 1), std::nullopt};
  if (deformable) block.offset.emplace(name + ".offset", in, 2 * 9, 3, stride, 1);
  return block;
}

}  // namespace

// ---------------------------------------------------------------- config

int ModelConfig::anchors_per_location() const {
  return static_cast<int>(ratios.size() * (fpn ? 1 : level_scales.size()));
}

std::vector<int> ModelConfig::strides() const {
  if (fpn) return {kStageStrides[0], kStageStrides[1], kStageStrides[2]};
  return {kStageStrides[2]};
}

RoiLevelRule ModelConfig::roi_rule() const {
  if (fpn) return RoiLevelRule{1, 32.0f, 0, 2};
  return RoiLevelRule{0, 32.0f, 0, 0};
}

std::vector<AnchorLevel> ModelConfig::anchor_levels(int image_h, int image_w) const {
  std::vector<AnchorLevel> levels;
  const std::vector<int> s = strides();
  if (fpn) {
    for (std::size_t l = 0; l < s.size(); ++l) {
      levels.push_back({s[l], {level_scales[l]}, image_h / s[l], image_w / s[l]});
    }
  } else {
    levels.push_back({s[0], level_scales, image_h / s[0], image_w / s[0]});
  }
  return levels;
}

void ModelConfig::validate() const {
  if (num_classes < 1) throw std::invalid_argument("model: num_classes must be >= 1");
  if (ratios.empty()) throw std::invalid_argument("model: ratios must be nonempty");
  if (level_scales.size() != 3) throw std::invalid_argument("model: need 3 level scales");
  if (pyramid_width < 1 || head_hidden < 1 || roi_size < 1) {
    throw std::invalid_argument("model: widths must be positive");
  }
}

// ---------------------------------------------------------------- layers

ConvLayer::ConvLayer(std::string layer_name, int in, int out, int k, int stride, int pad)
    : name(std::move(layer_name)), weights(out, in, k, k), grads(out, in, k, k),
      geometry{stride, pad} {}

Tensor ConvLayer::forward(const Tensor& x) const { return conv2d(x, weights, geometry); }

Tensor ConvLayer::backward(const Tensor& x, const Tensor& grad_out) {
  ConvGrads<float> g = conv2d_backward(x, weights, geometry, grad_out);
  grads.weight.add(g.weights.weight);
  for (std::size_t i = 0; i < grads.bias.size(); ++i) grads.bias[i] += g.weights.bias[i];
  return std::move(g.input);
}

void ConvLayer::collect(std::vector<ParamRef>& out) {
  out.push_back(make_ref(name + ".weight", dims_of(weights.weight.shape()), weights.weight.data(),
                         grads.weight.data()));
  out.push_back(make_ref(name + ".bias", {static_cast<std::uint32_t>(weights.bias.size())},
                         weights.bias, grads.bias));
}

void ConvLayer::zero_grad() {
  grads.weight.fill(0.0f);
  std::fill(grads.bias.begin(), grads.bias.end(), 0.0f);
}

Tensor MaybeDeformableConv::forward(const Tensor& x, Tensor* offsets_out) const {
  if (!offset) return main.forward(x);
  Tensor offsets = offset->forward(x);
  Tensor y = deformable_conv2d(x, offsets, main.weights, main.geometry);
  if (offsets_out != nullptr) *offsets_out = std::move(offsets);
  return y;
}

Tensor MaybeDeformableConv::backward(const Tensor& x, const Tensor& offsets,
                                     const Tensor& grad_out) {
  if (!offset) return main.backward(x, grad_out);
  DeformConvGrads<float> g =
      deformable_conv2d_backward(x, offsets, main.weights, main.geometry, grad_out);
  main.grads.weight.add(g.weights.weight);
  for (std::size_t i = 0; i < main.grads.bias.size(); ++i) {
    main.grads.bias[i] += g.weights.bias[i];
  }
  Tensor grad_x = std::move(g.input);
  grad_x.add(offset->backward(x, g.offsets));
  return grad_x;
}

void MaybeDeformableConv::collect(std::vector<ParamRef>& out) {
  main.collect(out);
  if (offset) offset->collect(out);
}

void MaybeDeformableConv::zero_grad() {
  main.zero_grad();
  if (offset) offset->zero_grad();
}

LinearLayer::LinearLayer(std::string layer_name, int in_features, int out_features)
    : name(std::move(layer_name)), in(in_features), out(out_features),
      weight(static_cast<std::size_t>(in_features) * out_features, 0.0f),
      bias(static_cast<std::size_t>(out_features), 0.0f), grad_weight(weight.size(), 0.0f),
      grad_bias(bias.size(), 0.0f) {}

std::vector<float> LinearLayer::forward(const std::vector<float>& x, int rows) const {
  if (x.size() != static_cast<std::size_t>(rows) * in) {
    throw ShapeError(name + ": expected " + std::to_string(rows) + " x " + std::to_string(in) +
                     " input");
  }
  std::vector<float> y(static_cast<std::size_t>(rows) * out, 0.0f);
  detail::gemm_nt<float>(rows, out, in, x.data(), weight.data(), y.data());
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < out; ++o) y[static_cast<std::size_t>(r) * out + o] += bias[o];
  }
  return y;
}

std::vector<float> LinearLayer::backward(const std::vector<float>& x,
                                         const std::vector<float>& grad_out, int rows) {
  if (grad_out.size() != static_cast<std::size_t>(rows) * out) {
    throw ShapeError(name + ": upstream gradient has wrong size");
  }
  detail::gemm_tn<float>(out, in, rows, grad_out.data(), x.data(), grad_weight.data());
  for (int r = 0; r < rows; ++r) {
    for (int o = 0; o < out; ++o) grad_bias[o] += grad_out[static_cast<std::size_t>(r) * out + o];
  }
  std::vector<float> grad_x(static_cast<std::size_t>(rows) * in, 0.0f);
  detail::gemm_nn<float>(rows, in, out, grad_out.data(), weight.data(), grad_x.data());
  return grad_x;
}

void LinearLayer::collect(std::vector<ParamRef>& refs) {
  refs.push_back(make_ref(name + ".weight",
                          {static_cast<std::uint32_t>(out), static_cast<std::uint32_t>(in)},
                          weight, grad_weight));
  refs.push_back(make_ref(name + ".bias", {static_cast<std::uint32_t>(out)}, bias, grad_bias));
}

void LinearLayer::zero_grad() {
  std::fill(grad_weight.begin(), grad_weight.end(), 0.0f);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0f);
}

// ---------------------------------------------------------------- detector

Detector::Detector(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const bool d = config_.deformable;
  backbone_.push_back(make_block("backbone.stem", 3, kStageChannels[0], 2, false));
  backbone_.push_back(make_block("backbone.stage1a", kStageChannels[0], kStageChannels[0], 2, false));
  backbone_.push_back(make_block("backbone.stage1b", kStageChannels[0], kStageChannels[0], 1, false));
  backbone_.push_back(make_block("backbone.stage2a", kStageChannels[0], kStageChannels[1], 2, d));
  backbone_.push_back(make_block("backbone.stage2b", kStageChannels[1], kStageChannels[1], 1, d));
  backbone_.push_back(make_block("backbone.stage3a", kStageChannels[1], kStageChannels[2], 2, d));
  backbone_.push_back(make_block("backbone.stage3b", kStageChannels[2], kStageChannels[2], 1, d));

  const int width = config_.pyramid_width;
  if (config_.fpn) {
    for (int l = 0; l < 3; ++l) {
      const std::string level = std::to_string(l + 2);
      laterals_.emplace_back("fpn.lateral" + level, kStageChannels[l], width, 1, 1, 0);
      smooths_.emplace_back("fpn.smooth" + level, width, width, 3, 1, 1);
    }
  } else {
    laterals_.emplace_back("neck.lateral", kStageChannels[2], width, 1, 1, 0);
    smooths_.emplace_back("neck.smooth", width, width, 3, 1, 1);
  }

  const int anchors = config_.anchors_per_location();
  rpn_conv_ = make_block("rpn.conv", width, width, 1, d);
  rpn_cls_ = ConvLayer("rpn.cls", width, anchors, 1, 1, 0);
  rpn_reg_ = ConvLayer("rpn.reg", width, 4 * anchors, 1, 1, 0);

  const int flat = width * config_.roi_size * config_.roi_size;
  fc_ = LinearLayer("head.fc", flat, config_.head_hidden);
  cls_ = LinearLayer("head.cls", config_.head_hidden, config_.num_classes + 1);
  reg_ = LinearLayer("head.reg", config_.head_hidden, 4 * config_.num_classes);

  // Draw order is fixed and skips offset branches, so the deformable and
  // regular variants of one seed share every other weight.
  Rng rng(derive_seed(seed, 0x4D4F44454CULL));
  const auto he = [&](ConvLayer& layer) {
    const double fan_in = static_cast<double>(layer.weights.weight.size()) /
                          layer.weights.out_channels();
    fill_normal(layer.weights.weight.data(), rng, std::sqrt(2.0 / fan_in));
  };
  for (MaybeDeformableConv& block : backbone_) he(block.main);
  for (ConvLayer& layer : laterals_) he(layer);
  for (ConvLayer& layer : smooths_) he(layer);
  he(rpn_conv_.main);
  fill_normal(rpn_cls_.weights.weight.data(), rng, 0.01);
  fill_normal(rpn_reg_.weights.weight.data(), rng, 0.01);
  fill_normal(fc_.weight, rng, std::sqrt(2.0 / flat));
  fill_normal(cls_.weight, rng, 0.01);
  fill_normal(reg_.weight, rng, 0.001);
}

std::vector<Tensor> Detector::backbone_forward(const Tensor& image, BackboneTrace* trace) const {
  if (image.n() != 1 || image.c() != 3) {
    throw ShapeError("backbone: expected a (1, 3, H, W) image, got " + to_string(image.shape()));
  }
  if (image.h() % 16 != 0 || image.w() % 16 != 0 || image.h() == 0 || image.w() == 0) {
    throw ShapeError("backbone: image dims must be positive multiples of 16, got " +
                     to_string(image.shape()));
  }
  if (trace != nullptr) trace->layers.assign(backbone_.size(), {});
  std::vector<Tensor> stages;
  Tensor x = image;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    Tensor offsets;
    Tensor z = backbone_[i].forward(x, &offsets);
    Tensor y = relu(z);
    if (trace != nullptr) {
      trace->layers[i] = {std::move(x), std::move(offsets), std::move(z)};
    }
    x = std::move(y);
    for (std::size_t s : kStageOutputs) {
      if (s == i) stages.push_back(x);
    }
  }
  return stages;
}

void Detector::backbone_backward(const BackboneTrace& trace,
                                 const std::vector<Tensor>& grad_stages) {
  if (trace.layers.size() != backbone_.size() || grad_stages.size() != 3) {
    throw ShapeError("backbone_backward: trace/gradient mismatch");
  }
  Tensor grad;
  for (std::size_t i = backbone_.size(); i-- > 0;) {
    for (std::size_t s = 0; s < 3; ++s) {
      if (kStageOutputs[s] != i) continue;
      if (grad.empty()) {
        grad = grad_stages[s];
      } else {
        grad.add(grad_stages[s]);
      }
    }
    const LayerTrace& t = trace.layers[i];
    const Tensor grad_z = relu_backward(t.pre_activation, grad);
    grad = backbone_[i].backward(t.input, t.offsets, grad_z);
  }
}

PyramidFeatures Detector::fpn_forward(const std::vector<Tensor>& stages, FpnTrace* trace) const {
  if (stages.size() != 3) throw ShapeError("fpn: expected 3 stage features");
  PyramidFeatures out;
  out.strides = config_.strides();
  if (!config_.fpn) {
    Tensor merged = laterals_[0].forward(stages[2]);
    out.levels.push_back(smooths_[0].forward(merged));
    if (trace != nullptr) {
      trace->stages = stages;
      trace->merged = {std::move(merged)};
    }
    return out;
  }
  std::vector<Tensor> merged(3);
  merged[2] = laterals_[2].forward(stages[2]);
  for (int l = 1; l >= 0; --l) {
    merged[l] = laterals_[l].forward(stages[l]);
    merged[l].add(upsample2x(merged[l + 1]));
  }
  for (int l = 0; l < 3; ++l) out.levels.push_back(smooths_[l].forward(merged[l]));
  if (trace != nullptr) {
    trace->stages = stages;
    trace->merged = std::move(merged);
  }
  return out;
}

std::vector<Tensor> Detector::fpn_backward(const FpnTrace& trace,
                                           const std::vector<Tensor>& grad_levels) {
  std::vector<Tensor> grad_stages;
  for (const Tensor& s : trace.stages) grad_stages.emplace_back(s.shape());
  if (!config_.fpn) {
    const Tensor grad_merged = smooths_[0].backward(trace.merged[0], grad_levels.at(0));
    grad_stages[2] = laterals_[0].backward(trace.stages[2], grad_merged);
    return grad_stages;
  }
  std::vector<Tensor> grad_merged(3);
  for (int l = 0; l < 3; ++l) {
    grad_merged[l] = smooths_[l].backward(trace.merged[l], grad_levels.at(l));
  }
  for (int l = 0; l < 3; ++l) {
    if (l > 0) grad_merged[l].add(upsample2x_adjoint(grad_merged[l - 1]));
    grad_stages[l] = laterals_[l].backward(trace.stages[l], grad_merged[l]);
  }
  return grad_stages;
}

std::vector<RpnLevelOutput> Detector::rpn_forward(const PyramidFeatures& pyramid,
                                                  RpnTrace* trace) const {
  std::vector<RpnLevelOutput> outputs;
  if (trace != nullptr) {
    trace->conv.clear();
    trace->hidden.clear();
  }
  for (const Tensor& level : pyramid.levels) {
    Tensor offsets;
    Tensor z = rpn_conv_.forward(level, &offsets);
    Tensor hidden = relu(z);
    outputs.push_back({rpn_cls_.forward(hidden), rpn_reg_.forward(hidden)});
    if (trace != nullptr) {
      trace->conv.push_back({level, std::move(offsets), std::move(z)});
      trace->hidden.push_back(std::move(hidden));
    }
  }
  return outputs;
}

std::vector<Tensor> Detector::rpn_backward(const RpnTrace& trace,
                                           const std::vector<RpnLevelOutput>& grad_outputs) {
  if (grad_outputs.size() != trace.conv.size()) throw ShapeError("rpn_backward: level mismatch");
  std::vector<Tensor> grads;
  for (std::size_t l = 0; l < trace.conv.size(); ++l) {
    Tensor grad_hidden = rpn_cls_.backward(trace.hidden[l], grad_outputs[l].objectness);
    grad_hidden.add(rpn_reg_.backward(trace.hidden[l], grad_outputs[l].deltas));
    const LayerTrace& t = trace.conv[l];
    grads.push_back(rpn_conv_.backward(t.input, t.offsets, relu_backward(t.pre_activation, grad_hidden)));
  }
  return grads;
}

HeadOutput Detector::head_forward(const Tensor& roi_features, HeadTrace* trace) const {
  const Shape4 expected{roi_features.n(), config_.pyramid_width, config_.roi_size,
                        config_.roi_size};
  if (roi_features.shape() != expected) {
    throw ShapeError("head: roi features " + to_string(roi_features.shape()) + ", expected " +
                     to_string(expected));
  }
  const int rows = roi_features.n();
  HeadOutput out;
  out.rows = rows;
  std::vector<float> hidden_pre = fc_.forward(roi_features.storage(), rows);
  std::vector<float> hidden(hidden_pre.size());
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] = std::max(hidden_pre[i], 0.0f);
  out.logits = cls_.forward(hidden, rows);
  out.deltas = reg_.forward(hidden, rows);
  const int classes = config_.num_classes + 1;
  const Tensor probs = softmax_channels(Tensor(Shape4{rows, classes, 1, 1}, out.logits));
  out.probs = probs.storage();
  if (trace != nullptr) {
    trace->rows = rows;
    trace->input = roi_features.storage();
    trace->hidden_pre = std::move(hidden_pre);
    trace->hidden = std::move(hidden);
  }
  return out;
}

Tensor Detector::head_backward(const HeadTrace& trace, const std::vector<float>& grad_logits,
                               const std::vector<float>& grad_deltas) {
  const int rows = trace.rows;
  std::vector<float> grad_hidden = cls_.backward(trace.hidden, grad_logits, rows);
  const std::vector<float> from_reg = reg_.backward(trace.hidden, grad_deltas, rows);
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    grad_hidden[i] = trace.hidden_pre[i] > 0.0f ? grad_hidden[i] + from_reg[i] : 0.0f;
  }
  std::vector<float> grad_input = fc_.backward(trace.input, grad_hidden, rows);
  return Tensor(Shape4{rows, config_.pyramid_width, config_.roi_size, config_.roi_size},
                std::move(grad_input));
}

std::vector<ParamRef> Detector::parameters() {
  std::vector<ParamRef> refs;
  for (MaybeDeformableConv& block : backbone_) block.collect(refs);
  for (ConvLayer& layer : laterals_) layer.collect(refs);
  for (ConvLayer& layer : smooths_) layer.collect(refs);
  rpn_conv_.collect(refs);
  rpn_cls_.collect(refs);
  rpn_reg_.collect(refs);
  fc_.collect(refs);
  cls_.collect(refs);
  reg_.collect(refs);
  return refs;
}

void Detector::zero_grad() {
  for (MaybeDeformableConv& block : backbone_) block.zero_grad();
  for (ConvLayer& layer : laterals_) layer.zero_grad();
  for (ConvLayer& layer : smooths_) layer.zero_grad();
  rpn_conv_.zero_grad();
  rpn_cls_.zero_grad();
  rpn_reg_.zero_grad();
  fc_.zero_grad();
  cls_.zero_grad();
  reg_.zero_grad();
}

// ---------------------------------------------------------------- helpers

Tensor image_to_tensor(const Image& img) {
  img.validate();
  Tensor t(Shape4{1, 3, img.height, img.width});
  for (int c = 0; c < 3; ++c) {
    const int src = img.channels == 1 ? 0 : c;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        t.at(0, c, y, x) = static_cast<float>(img.at(x, y, src)) / 255.0f;
      }
    }
  }
  return t;
}

Tensor upsample2x(const Tensor& x) {
  Tensor out(Shape4{x.n(), x.c(), 2 * x.h(), 2 * x.w()});
  for (int n = 0; n < x.n(); ++n) {
    for (int c = 0; c < x.c(); ++c) {
      for (int y = 0; y < out.h(); ++y) {
        for (int xx = 0; xx < out.w(); ++xx) out.at(n, c, y, xx) = x.at(n, c, y / 2, xx / 2);
      }
    }
  }
  return out;
}

Tensor upsample2x_adjoint(const Tensor& grad) {
  if (grad.h() % 2 != 0 || grad.w() % 2 != 0) {
    throw ShapeError("upsample2x_adjoint: odd spatial dims " + to_string(grad.shape()));
  }
  Tensor out(Shape4{grad.n(), grad.c(), grad.h() / 2, grad.w() / 2});
  for (int n = 0; n < grad.n(); ++n) {
    for (int c = 0; c < grad.c(); ++c) {
      for (int y = 0; y < grad.h(); ++y) {
        for (int x = 0; x < grad.w(); ++x) out.at(n, c, y / 2, x / 2) += grad.at(n, c, y, x);
      }
    }
  }
  return out;
}

}  // namespace tdet::model

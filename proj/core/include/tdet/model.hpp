#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdet/anchors.hpp"
#include "tdet/conv.hpp"
#include "tdet/image.hpp"
#include "tdet/params.hpp"
#include "tdet/roi.hpp"
#include "tdet/tensor.hpp"

namespace tdet::model {

struct ModelConfig {
  int num_classes = 3;
  bool deformable = true;  // deformable stage-2/3 and RPN convs
  bool fpn = true;         // 3-level pyramid; otherwise single stride-16 level
  int pyramid_width = 32;
  int head_hidden = 256;
  int roi_size = 7;
  std::vector<float> ratios{0.5f, 1.0f, 2.0f};
  std::vector<float> level_scales{16.0f, 32.0f, 64.0f};

  int anchors_per_location() const;
  std::vector<int> strides() const;
  RoiLevelRule roi_rule() const;
  std::vector<AnchorLevel> anchor_levels(int image_h, int image_w) const;
  void validate() const;
};

// Convolution with its own gradient accumulator.
struct ConvLayer {
  std::string name;
  ConvWeights weights;
  ConvWeights grads;
  ConvGeometry geometry;

  ConvLayer() = default;
  ConvLayer(std::string layer_name, int in, int out, int k, int stride, int pad);

  Tensor forward(const Tensor& x) const;
  // Accumulates weight/bias gradients; returns d loss / d x.
  Tensor backward(const Tensor& x, const Tensor& grad_out);
  void collect(std::vector<ParamRef>& out);
  void zero_grad();
};

// 3x3 convolution that becomes deformable when it owns an offset branch. The
// branch is a sibling convolution on the same input with the same stride,
// zero-initialised so the layer starts out as a regular convolution.
struct MaybeDeformableConv {
  ConvLayer main;
  std::optional<ConvLayer> offset;

  Tensor forward(const Tensor& x, Tensor* offsets_out) const;
  Tensor backward(const Tensor& x, const Tensor& offsets, const Tensor& grad_out);
  void collect(std::vector<ParamRef>& out);
  void zero_grad();
};

struct LinearLayer {
  std::string name;
  int in = 0;
  int out = 0;
  std::vector<float> weight;  // out x in
  std::vector<float> bias;
  std::vector<float> grad_weight;
  std::vector<float> grad_bias;

  LinearLayer() = default;
  LinearLayer(std::string layer_name, int in_features, int out_features);

  // rows x in -> rows x out
  std::vector<float> forward(const std::vector<float>& x, int rows) const;
  std::vector<float> backward(const std::vector<float>& x, const std::vector<float>& grad_out,
                              int rows);
  void collect(std::vector<ParamRef>& out);
  void zero_grad();
};

// Input, offsets (deformable only) and pre-activation of one layer call.
struct LayerTrace {
  Tensor input;
  Tensor offsets;
  Tensor pre_activation;
};

struct BackboneTrace {
  std::vector<LayerTrace> layers;
};

struct PyramidFeatures {
  std::vector<Tensor> levels;  // (1, width, H_l, W_l), finest first
  std::vector<int> strides;
};

struct FpnTrace {
  std::vector<Tensor> stages;
  std::vector<Tensor> merged;  // inputs of the smoothing convs
};

struct RpnLevelOutput {
  Tensor objectness;  // (1, A, H, W) logits
  Tensor deltas;      // (1, 4A, H, W); channel 4a + k
};

struct RpnTrace {
  std::vector<LayerTrace> conv;
  std::vector<Tensor> hidden;
};

struct HeadOutput {
  int rows = 0;
  std::vector<float> logits;  // rows x (num_classes + 1), class 0 = background
  std::vector<float> probs;   // softmax of logits
  std::vector<float> deltas;  // rows x 4 num_classes
};

struct HeadTrace {
  int rows = 0;
  std::vector<float> input;
  std::vector<float> hidden_pre;
  std::vector<float> hidden;
};

class Detector {
 public:
  // Weights drawn from a fan-in scaled normal; biases and offset branches zero.
  Detector(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Stage features at strides 4/8/16 with 16/32/64 channels.
  std::vector<Tensor> backbone_forward(const Tensor& image, BackboneTrace* trace = nullptr) const;
  PyramidFeatures fpn_forward(const std::vector<Tensor>& stages, FpnTrace* trace = nullptr) const;
  std::vector<RpnLevelOutput> rpn_forward(const PyramidFeatures& pyramid,
                                          RpnTrace* trace = nullptr) const;
  // roi_features: (N, pyramid_width, roi_size, roi_size).
  HeadOutput head_forward(const Tensor& roi_features, HeadTrace* trace = nullptr) const;

  void backbone_backward(const BackboneTrace& trace, const std::vector<Tensor>& grad_stages);
  std::vector<Tensor> fpn_backward(const FpnTrace& trace, const std::vector<Tensor>& grad_levels);
  std::vector<Tensor> rpn_backward(const RpnTrace& trace,
                                   const std::vector<RpnLevelOutput>& grad_outputs);
  Tensor head_backward(const HeadTrace& trace, const std::vector<float>& grad_logits,
                       const std::vector<float>& grad_deltas);

  // Stable order; names are unique.
  std::vector<ParamRef> parameters();
  void zero_grad();

 private:
  ModelConfig config_;
  std::vector<MaybeDeformableConv> backbone_;  // stem, s1a, s1b, s2a, s2b, s3a, s3b
  std::vector<ConvLayer> laterals_;
  std::vector<ConvLayer> smooths_;
  MaybeDeformableConv rpn_conv_;
  ConvLayer rpn_cls_;
  ConvLayer rpn_reg_;
  LinearLayer fc_;
  LinearLayer cls_;
  LinearLayer reg_;
};

// Image (H x W x C, 8-bit) to a (1, 3, H, W) tensor in [0, 1]; gray is replicated.
Tensor image_to_tensor(const Image& img);

// Nearest-neighbour 2x upsampling and its adjoint (2x2 block sum).
Tensor upsample2x(const Tensor& x);
Tensor upsample2x_adjoint(const Tensor& grad);

}  // namespace tdet::model

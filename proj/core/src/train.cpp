#include "tdet/train.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "tdet/activations.hpp"
#include "tdet/anchors.hpp"
#include "tdet/loss.hpp"
#include "tdet/roi.hpp"

namespace tdet {

namespace {

constexpr std::uint64_t kSamplerStream = 0x53414D50;
constexpr std::uint64_t kOrderStream = 0x4F524452;

// Uniform draw of k items without replacement, in draw order.
std::vector<std::size_t> sample(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  k = std::min(k, pool.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

bool grads_finite(model::Detector& detector) {
  for (const ParamRef& p : detector.parameters()) {
    for (const float g : p.grad) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

}  // namespace

TrainExample make_example(const Image& image, std::vector<BoxAnnotation> boxes) {
  return {model::image_to_tensor(image), image.height, image.width, std::move(boxes)};
}

StepLosses compute_gradients(model::Detector& detector, const TrainExample& example,
                             const TrainConfig& train, const loss::LossConfig& loss_config,
                             Rng& sampler, const MatchThresholds& thresholds,
                             const ProposalConfig& proposals) {
  const model::ModelConfig& mc = detector.config();
  detector.zero_grad();
  const int h = example.height;
  const int w = example.width;
  std::vector<Box> gts;
  for (const auto& b : example.boxes) gts.push_back(b.box);

  model::BackboneTrace backbone_trace;
  model::FpnTrace fpn_trace;
  model::RpnTrace rpn_trace;
  const std::vector<Tensor> stages = detector.backbone_forward(example.input, &backbone_trace);
  const model::PyramidFeatures pyramid = detector.fpn_forward(stages, &fpn_trace);
  const std::vector<model::RpnLevelOutput> rpn_out = detector.rpn_forward(pyramid, &rpn_trace);
  const AnchorScores scores = gather_rpn(mc, rpn_out, h, w);

  // RPN minibatch.
  std::vector<Box> anchor_boxes;
  anchor_boxes.reserve(scores.anchors.size());
  for (const Anchor& a : scores.anchors) anchor_boxes.push_back(a.box());
  const MatchResult match =
      match_anchors(anchor_boxes, gts, thresholds.rpn_positive, thresholds.rpn_negative);
  std::vector<std::size_t> pos_pool;
  std::vector<std::size_t> neg_pool;
  for (std::size_t i = 0; i < match.labels.size(); ++i) {
    if (match.labels[i] == AnchorLabel::positive) pos_pool.push_back(i);
    if (match.labels[i] == AnchorLabel::negative) neg_pool.push_back(i);
  }
  const auto rpn_batch = static_cast<std::size_t>(train.rpn_batch);
  std::vector<std::size_t> rpn_pick = sample(pos_pool, rpn_batch / 2, sampler);
  const std::size_t rpn_pos = rpn_pick.size();
  for (const std::size_t i : sample(neg_pool, rpn_batch - rpn_pos, sampler)) rpn_pick.push_back(i);

  loss::RpnBatch batch;
  for (std::size_t j = 0; j < rpn_pick.size(); ++j) {
    const std::size_t i = rpn_pick[j];
    const bool positive = j < rpn_pos;
    batch.p.push_back(sigmoid(scores.logits[i]));
    batch.p_star.push_back(positive ? 1.0f : 0.0f);
    batch.t.push_back(scores.deltas[i]);
    batch.t_star.push_back(positive ? match.targets[i] : BoxDelta{});
  }
  batch.n_f = batch.n_r = std::max<std::size_t>(rpn_pick.size(), 1);
  const loss::LossResult<float> rpn_loss = loss::total_loss(batch, loss_config);

  std::vector<model::RpnLevelOutput> rpn_grad;
  for (const auto& o : rpn_out) {
    rpn_grad.push_back({Tensor(o.objectness.shape()), Tensor(o.deltas.shape())});
  }
  for (std::size_t j = 0; j < rpn_pick.size(); ++j) {
    const AnchorSite site = anchor_site(mc, h, w, rpn_pick[j]);
    auto& g = rpn_grad[static_cast<std::size_t>(site.level)];
    const float p = batch.p[j];
    g.objectness.at(0, site.slot, site.y, site.x) += rpn_loss.grad_p[j] * p * (1.0f - p);
    for (int k = 0; k < 4; ++k) {
      g.deltas.at(0, 4 * site.slot + k, site.y, site.x) +=
          rpn_loss.grad_t[j][static_cast<std::size_t>(k)];
    }
  }

  // Head minibatch over proposals plus the ground truth boxes.
  std::vector<Box> rois = propose(scores, h, w, proposals);
  rois.insert(rois.end(), gts.begin(), gts.end());
  std::vector<std::size_t> fg_pool;
  std::vector<std::size_t> bg_pool;
  std::vector<int> best_gt(rois.size(), -1);
  for (std::size_t r = 0; r < rois.size(); ++r) {
    float best = 0.0f;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const float v = iou(rois[r], gts[g]);
      if (v > best) {
        best = v;
        best_gt[r] = static_cast<int>(g);
      }
    }
    (best >= thresholds.head_positive ? fg_pool : bg_pool).push_back(r);
  }
  const auto head_batch = static_cast<std::size_t>(train.head_batch);
  std::vector<std::size_t> head_pick = sample(fg_pool, head_batch / 4, sampler);
  const std::size_t head_pos = head_pick.size();
  for (const std::size_t r : sample(bg_pool, head_batch - head_pos, sampler)) {
    head_pick.push_back(r);
  }

  std::vector<Box> picked;
  std::vector<int> labels;
  for (std::size_t j = 0; j < head_pick.size(); ++j) {
    const std::size_t r = head_pick[j];
    picked.push_back(rois[r]);
    labels.push_back(j < head_pos ? example.boxes[static_cast<std::size_t>(best_gt[r])].class_id + 1
                                  : 0);
  }

  StepLosses out;
  out.classification = rpn_loss.classification;
  out.regression = rpn_loss.regression;

  std::vector<Tensor> grad_levels = detector.rpn_backward(rpn_trace, rpn_grad);
  if (!picked.empty()) {
    model::HeadTrace head_trace;
    const model::HeadOutput head =
        detector.head_forward(stack_roi_features(mc, pyramid, picked), &head_trace);
    const int classes = mc.num_classes + 1;
    const loss::SoftmaxXentResult xent =
        loss::softmax_cross_entropy(head.logits, static_cast<std::size_t>(classes), labels);
    std::vector<float> grad_deltas(head.deltas.size(), 0.0f);
    const double n_r = static_cast<double>(picked.size());
    const double sigma = loss_config.sigma;
    double reg = 0.0;
    for (std::size_t j = 0; j < head_pos; ++j) {
      const int c = labels[j] - 1;
      const std::size_t base = j * 4 * static_cast<std::size_t>(mc.num_classes) + 4 * c;
      const BoxDelta target =
          encode_box(picked[j], gts[static_cast<std::size_t>(best_gt[head_pick[j]])]);
      for (std::size_t k = 0; k < 4; ++k) {
        const double x = static_cast<double>(head.deltas[base + k]) - target[k];
        reg += loss::smooth_l1(x, sigma);
        grad_deltas[base + k] =
            static_cast<float>(loss_config.alpha / n_r * loss::smooth_l1_grad(x, sigma));
      }
    }
    reg *= loss_config.alpha / n_r;
    out.classification += xent.loss;
    out.regression += reg;

    const Tensor grad_rois = detector.head_backward(head_trace, xent.grad, grad_deltas);
    const int size = mc.roi_size;
    const std::size_t per_roi = grad_rois.shape().numel() / picked.size();
    for (std::size_t j = 0; j < picked.size(); ++j) {
      Tensor g(Shape4{1, mc.pyramid_width, size, size});
      std::copy(grad_rois.data().begin() + j * per_roi,
                grad_rois.data().begin() + (j + 1) * per_roi, g.data().begin());
      roi_extract_backward(pyramid.strides, picked[j], size, mc.roi_rule(), g, grad_levels);
    }
  }
  out.total = out.classification + out.regression;
  if (!std::isfinite(out.total)) return out;

  detector.backbone_backward(backbone_trace, detector.fpn_backward(fpn_trace, grad_levels));
  return out;
}

std::vector<StepLosses> train_detector(model::Detector& detector,
                                       const std::vector<TrainExample>& data,
                                       const RunConfig& config, std::ostream* log_csv) {
  if (data.empty()) throw std::invalid_argument("train_detector: empty training set");
  if (config.train.steps < 1) throw std::invalid_argument("train_detector: steps must be >= 1");
  AdamHyper hyper;
  hyper.lr = config.train.lr;
  AdamState adam(hyper);
  Rng sampler(derive_seed(config.seed, kSamplerStream));
  std::vector<std::size_t> order(data.size());
  std::size_t cursor = order.size();
  std::uint64_t epoch = 0;
  std::vector<StepLosses> log;
  int consecutive_skips = 0;
  if (log_csv != nullptr) *log_csv << kLossLogHeader << '\n' << std::flush;

  for (int step = 1; step <= config.train.steps; ++step) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle(derive_seed(derive_seed(config.seed, kOrderStream), epoch++));
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
      cursor = 0;
    }
    const TrainExample& example = data[order[cursor++]];
    StepLosses s = compute_gradients(detector, example, config.train, config.loss, sampler);
    if (!std::isfinite(s.total) || !grads_finite(detector)) {
      s.skipped = true;
      detector.zero_grad();
      if (++consecutive_skips >= kMaxConsecutiveSkips) {
        if (log_csv != nullptr) *log_csv << step << ",nan,nan,nan\n" << std::flush;
        throw DivergenceError("training diverged: " + std::to_string(kMaxConsecutiveSkips) +
                              " consecutive non-finite steps ending at step " +
                              std::to_string(step));
      }
    } else {
      consecutive_skips = 0;
      adam_step(detector.parameters(), adam);
    }
    if (log_csv != nullptr) {
      if (s.skipped) {
        *log_csv << step << ",nan,nan,nan\n";
      } else {
        *log_csv << step << ',' << s.total << ',' << s.classification << ',' << s.regression
                 << '\n';
      }
      log_csv->flush();
    }
    if (config.train.log_every > 0 && step % config.train.log_every == 0) {
      std::cerr << "step " << step << " loss " << s.total << '\n';
    }
    log.push_back(s);
  }
  return log;
}

}  // namespace tdet

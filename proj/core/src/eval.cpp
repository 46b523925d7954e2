#include "tdet/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

namespace tdet::eval {

namespace {

struct ClassIndex {
  // image -> gts of one class in input order
  std::map<std::string, std::vector<BoxAnnotation>> gts;
  std::size_t n_gt = 0;
};

// TP flags for `ordered` detections (already descending by score), matched
// per image against that image's gts of the same class.
std::vector<bool> match_ordered(const std::vector<const ImageDetection*>& ordered,
                                const ClassIndex& index, float iou_thresh) {
  std::map<std::string, std::vector<Detection>> per_image;
  std::map<std::string, std::vector<std::size_t>> positions;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    per_image[ordered[i]->image].push_back(ordered[i]->det);
    positions[ordered[i]->image].push_back(i);
  }
  std::vector<bool> flags(ordered.size(), false);
  for (const auto& [image, dets] : per_image) {
    const auto it = index.gts.find(image);
    if (it == index.gts.end()) continue;
    const std::vector<bool> local = match_detections(dets, it->second, iou_thresh);
    const std::vector<std::size_t>& pos = positions[image];
    for (std::size_t k = 0; k < local.size(); ++k) flags[pos[k]] = local[k];
  }
  return flags;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string class_label(int id, const std::vector<std::string>& names) {
  if (id >= 0 && static_cast<std::size_t>(id) < names.size()) return names[id];
  return std::to_string(id);
}

}  // namespace

std::vector<bool> match_detections(const std::vector<Detection>& dets,
                                   const std::vector<BoxAnnotation>& gts, float iou_thresh) {
  std::vector<bool> flags(dets.size(), false);
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    int best = -1;
    float best_iou = 0.0f;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].class_id != dets[d].class_id) continue;
      const float v = iou(dets[d].box, gts[g].box);
      if (v >= iou_thresh && (best < 0 || v > best_iou)) {
        best = static_cast<int>(g);
        best_iou = v;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      flags[d] = true;
    }
  }
  return flags;
}

double average_precision(const std::vector<bool>& flags, const std::vector<float>& scores,
                         std::size_t n_gt) {
  if (n_gt == 0) throw std::invalid_argument("average_precision: n_gt must be >= 1");
  if (flags.size() != scores.size()) {
    throw std::invalid_argument("average_precision: flags/scores length mismatch");
  }
  const std::vector<std::size_t> order = order_by_score(scores);
  const std::size_t n = order.size();
  std::vector<double> precision(n);
  std::vector<double> recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (flags[order[k]]) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) / static_cast<double>(n_gt);
  }
  // Envelope: precision at rank k becomes the best precision at any rank >= k.
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return ap;
}

EvalReport evaluate(const std::vector<ImageDetection>& dets,
                    const std::vector<ImageAnnotation>& gts, const EvalOptions& options) {
  if (gts.empty()) throw std::invalid_argument("evaluate: no ground truth to evaluate against");
  EvalReport report;
  report.iou_thresh = options.iou_thresh;
  report.score_thresh = options.score_thresh;
  report.num_gt = gts.size();
  report.num_det = dets.size();

  std::map<int, ClassIndex> classes;
  for (const ImageAnnotation& g : gts) {
    ClassIndex& idx = classes[g.ann.class_id];
    idx.gts[g.image].push_back(g.ann);
    ++idx.n_gt;
  }

  // Global ranking; ties keep input order.
  std::vector<float> all_scores(dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) all_scores[i] = dets[i].det.score;
  const std::vector<std::size_t> ranking = order_by_score(all_scores);

  // Top-k per image for the recall metric.
  std::vector<bool> in_top_k(dets.size(), false);
  {
    std::map<std::string, std::size_t> taken;
    for (std::size_t idx : ranking) {
      std::size_t& count = taken[dets[idx].image];
      if (count < options.max_dets_per_image) {
        in_top_k[idx] = true;
        ++count;
      }
    }
  }

  for (const auto& [class_id, index] : classes) {
    std::vector<const ImageDetection*> ranked;
    std::vector<const ImageDetection*> ranked_top;
    std::vector<const ImageDetection*> ranked_confident;
    for (std::size_t idx : ranking) {
      const ImageDetection& d = dets[idx];
      if (d.det.class_id != class_id) continue;
      ranked.push_back(&d);
      if (in_top_k[idx]) ranked_top.push_back(&d);
      if (d.det.score >= options.score_thresh) ranked_confident.push_back(&d);
    }

    ClassMetrics m;
    m.class_id = class_id;
    m.n_gt = index.n_gt;
    m.n_det = ranked.size();

    const std::vector<bool> flags = match_ordered(ranked, index, options.iou_thresh);
    std::vector<float> scores(ranked.size());
    for (std::size_t i = 0; i < ranked.size(); ++i) scores[i] = ranked[i]->det.score;
    m.ap = average_precision(flags, scores, index.n_gt);

    const std::vector<bool> top_flags = match_ordered(ranked_top, index, options.iou_thresh);
    m.ar = static_cast<double>(std::count(top_flags.begin(), top_flags.end(), true)) /
           static_cast<double>(index.n_gt);

    const std::vector<bool> conf_flags =
        match_ordered(ranked_confident, index, options.iou_thresh);
    const auto tp = static_cast<double>(std::count(conf_flags.begin(), conf_flags.end(), true));
    m.precision = conf_flags.empty() ? 0.0 : tp / static_cast<double>(conf_flags.size());
    m.recall = tp / static_cast<double>(index.n_gt);
    m.f1 = m.precision + m.recall > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    report.per_class.push_back(m);
  }

  const auto count = static_cast<double>(report.per_class.size());
  for (const ClassMetrics& m : report.per_class) {
    report.map += m.ap / count;
    report.mar += m.ar / count;
    report.f1 += m.f1 / count;
    report.mean_precision += m.precision / count;
    report.mean_recall += m.recall / count;
  }
  return report;
}

std::string report_csv(const EvalReport& report, const std::vector<std::string>& class_names) {
  std::string out = "class,n_gt,n_det,ap,ar,precision,recall,f1\n";
  for (const ClassMetrics& m : report.per_class) {
    out += class_label(m.class_id, class_names) + "," + std::to_string(m.n_gt) + "," +
           std::to_string(m.n_det) + "," + fmt(m.ap) + "," + fmt(m.ar) + "," +
           fmt(m.precision) + "," + fmt(m.recall) + "," + fmt(m.f1) + "\n";
  }
  out += "all," + std::to_string(report.num_gt) + "," + std::to_string(report.num_det) + "," +
         fmt(report.map) + "," + fmt(report.mar) + "," + fmt(report.mean_precision) + "," +
         fmt(report.mean_recall) + "," + fmt(report.f1) + "\n";
  return out;
}

std::string report_table(const EvalReport& report,
                         const std::vector<std::string>& class_names) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %6s %6s %8s %8s %9s %8s %8s\n", "class", "gt", "det",
                "AP", "AR", "precision", "recall", "F1");
  out += line;
  for (const ClassMetrics& m : report.per_class) {
    std::snprintf(line, sizeof line, "%-12s %6zu %6zu %8.4f %8.4f %9.4f %8.4f %8.4f\n",
                  class_label(m.class_id, class_names).c_str(), m.n_gt, m.n_det, m.ap, m.ar,
                  m.precision, m.recall, m.f1);
    out += line;
  }
  std::snprintf(line, sizeof line, "%-12s %6zu %6zu %8.4f %8.4f %9.4f %8.4f %8.4f\n", "mean",
                report.num_gt, report.num_det, report.map, report.mar, report.mean_precision,
                report.mean_recall, report.f1);
  out += line;
  std::snprintf(line, sizeof line, "(IoU >= %.2f, F1 at score >= %.2f)\n",
                static_cast<double>(report.iou_thresh), static_cast<double>(report.score_thresh));
  out += line;
  return out;
}

}  // namespace tdet::eval

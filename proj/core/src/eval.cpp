#include "owl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace owl::eval {

using boxes::AnnotatedBox;
using boxes::iou;

void EvalSet::validate() const {
  std::vector<ClassId> known = known_set;
  std::sort(known.begin(), known.end());
  for (const auto& [image, gts] : ground_truths) {
    for (std::size_t i = 0; i < gts.size(); ++i) {
      const ClassId l = gts[i].label;
      if (l != kUnknownClass && !std::binary_search(known.begin(), known.end(), l)) {
        throw InvalidArgument("ground truth " + std::to_string(i) + " of image " +
                              std::to_string(image) + " has label " + std::to_string(l) +
                              " outside the known set");
      }
    }
  }
  for (std::size_t i = 0; i < detections.size(); ++i) {
    if (!std::isfinite(detections[i].confidence)) {
      throw InvalidArgument("detection " + std::to_string(i) + " has non-finite confidence");
    }
  }
}

std::size_t EvalSet::num_unknown_gts() const {
  std::size_t n = 0;
  for (const auto& [image, gts] : ground_truths) {
    for (const auto& g : gts) n += g.label == kUnknownClass ? 1 : 0;
  }
  return n;
}

namespace {

const std::vector<AnnotatedBox>& gts_of(const GroundTruthMap& gts, ImageId image) {
  static const std::vector<AnnotatedBox> kEmpty;
  auto it = gts.find(image);
  return it == gts.end() ? kEmpty : it->second;
}

std::vector<std::size_t> confidence_order(std::span<const DetectionRecord> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].confidence > dets[b].confidence;
  });
  return order;
}

// Index of the best-IoU gt in the image over all labels, or -1 when the image
// has no gts. Ties keep the earlier gt.
struct BestGt {
  int index = -1;
  double overlap = 0.0;
};

BestGt best_gt(const DetectionRecord& d, const std::vector<AnnotatedBox>& gts) {
  BestGt best;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const double o = iou(d.box, gts[g].box);
    if (best.index < 0 || o > best.overlap) {
      best.index = static_cast<int>(g);
      best.overlap = o;
    }
  }
  return best;
}

bool lands_on_unknown(const DetectionRecord& d, const std::vector<AnnotatedBox>& gts,
                      double iou_thresh) {
  const BestGt b = best_gt(d, gts);
  return b.index >= 0 && gts[static_cast<std::size_t>(b.index)].label == kUnknownClass &&
         b.overlap >= iou_thresh;
}

// Shared greedy matcher; `absorb_unknown` turns detections landing on unknown
// gts into false positives that consume nothing.
MatchResult greedy_match(std::span<const DetectionRecord> dets, const GroundTruthMap& gts,
                         double iou_thresh, bool absorb_unknown) {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) {
    throw InvalidArgument("IoU threshold must lie in (0, 1]");
  }
  MatchResult result;
  result.true_positive.assign(dets.size(), false);
  for (const auto& [image, list] : gts) result.gt_matched[image].assign(list.size(), false);

  for (std::size_t di : confidence_order(dets)) {
    const DetectionRecord& d = dets[di];
    const auto& list = gts_of(gts, d.image_id);
    if (list.empty()) continue;
    if (absorb_unknown && lands_on_unknown(d, list, iou_thresh)) continue;
    auto& matched = result.gt_matched[d.image_id];
    int best = -1;
    double best_overlap = -1.0;
    for (std::size_t g = 0; g < list.size(); ++g) {
      if (matched[g] || list[g].label != d.label) continue;
      const double o = iou(d.box, list[g].box);
      if (o > best_overlap) {
        best_overlap = o;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_overlap >= iou_thresh) {
      matched[static_cast<std::size_t>(best)] = true;
      result.true_positive[di] = true;
    }
  }
  return result;
}

PRCurve build_curve(std::span<const DetectionRecord> dets, const std::vector<bool>& tp,
                    std::size_t num_gt) {
  PRCurve curve;
  curve.num_gt = num_gt;
  const auto order = confidence_order(dets);
  std::size_t n_tp = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t di = order[pos];
    n_tp += tp[di] ? 1 : 0;
    const bool group_end =
        pos + 1 == order.size() || dets[order[pos + 1]].confidence != dets[di].confidence;
    if (!group_end) continue;
    PRPoint p;
    p.threshold = dets[di].confidence;
    p.true_positives = n_tp;
    p.detections = pos + 1;
    p.precision = static_cast<double>(n_tp) / static_cast<double>(pos + 1);
    p.recall = num_gt == 0 ? 0.0 : static_cast<double>(n_tp) / static_cast<double>(num_gt);
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace

MatchResult match_detections(std::span<const DetectionRecord> detections,
                             const GroundTruthMap& ground_truths, double iou_thresh) {
  return greedy_match(detections, ground_truths, iou_thresh, false);
}

PRCurve class_pr_curve(const EvalSet& eval, ClassId c, double iou_thresh) {
  std::vector<DetectionRecord> dets;
  for (const auto& d : eval.detections) {
    if (d.label == c) dets.push_back(d);
  }
  std::size_t num_gt = 0;
  for (const auto& [image, list] : eval.ground_truths) {
    for (const auto& g : list) num_gt += g.label == c ? 1 : 0;
  }
  const MatchResult m = greedy_match(dets, eval.ground_truths, iou_thresh, false);
  return build_curve(dets, m.true_positive, num_gt);
}

PRCurve pooled_known_curve(const EvalSet& eval, double iou_thresh) {
  std::vector<DetectionRecord> dets;
  for (const auto& d : eval.detections) {
    if (d.label != kUnknownClass) dets.push_back(d);
  }
  std::size_t num_gt = 0;
  for (const auto& [image, list] : eval.ground_truths) {
    for (const auto& g : list) num_gt += g.label != kUnknownClass ? 1 : 0;
  }
  const MatchResult m = greedy_match(dets, eval.ground_truths, iou_thresh, true);
  return build_curve(dets, m.true_positive, num_gt);
}

std::optional<double> average_precision(const PRCurve& curve) {
  if (curve.num_gt == 0) return std::nullopt;
  if (curve.points.empty()) return 0.0;
  // Running max from the right gives the precision envelope.
  std::vector<double> envelope(curve.points.size());
  double running = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    running = std::max(running, curve.points[i].precision);
    envelope[i] = running;
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    ap += (curve.points[i].recall - prev_recall) * envelope[i];
    prev_recall = curve.points[i].recall;
  }
  return ap;
}

double map_over(std::span<const ClassId> classes, const EvalSet& eval, double iou_thresh) {
  if (classes.empty()) throw InvalidArgument("map_over: empty class set");
  double sum = 0.0;
  std::size_t n = 0;
  for (ClassId c : classes) {
    const auto ap = average_precision(class_pr_curve(eval, c, iou_thresh));
    if (!ap) continue;
    sum += *ap;
    ++n;
  }
  if (n == 0) throw InvalidArgument("map_over: no class in the set has ground truth");
  return sum / static_cast<double>(n);
}

OperatingPoint precision_at_recall(const PRCurve& curve, double recall_level) {
  if (!(recall_level > 0.0 && recall_level <= 1.0)) {
    throw InvalidArgument("recall level must lie in (0, 1]");
  }
  if (curve.points.empty()) throw InvalidArgument("precision_at_recall: empty curve");
  const PRPoint* chosen = nullptr;
  for (const auto& p : curve.points) {
    if (p.recall >= recall_level) {
      chosen = &p;
      break;
    }
  }
  OperatingPoint op;
  if (chosen == nullptr) {
    op.recall_reached = false;
    chosen = &curve.points.front();
    for (const auto& p : curve.points) {
      if (p.recall > chosen->recall) chosen = &p;
    }
  }
  op.precision = chosen->precision;
  op.recall = chosen->recall;
  op.threshold = chosen->threshold;
  return op;
}

double precision_at_threshold(const PRCurve& curve, double threshold) {
  const PRPoint* chosen = nullptr;
  for (const auto& p : curve.points) {
    if (p.threshold >= threshold) chosen = &p;
  }
  if (chosen == nullptr) {
    throw InvalidArgument("precision_at_threshold: no detection at or above the threshold");
  }
  return chosen->precision;
}

EvalSet known_only_view(const EvalSet& mixed, double iou_thresh) {
  EvalSet out;
  out.known_set = mixed.known_set;
  for (const auto& d : mixed.detections) {
    if (!lands_on_unknown(d, gts_of(mixed.ground_truths, d.image_id), iou_thresh)) {
      out.detections.push_back(d);
    }
  }
  for (const auto& [image, list] : mixed.ground_truths) {
    auto& kept = out.ground_truths[image];
    for (const auto& g : list) {
      if (g.label != kUnknownClass) kept.push_back(g);
    }
  }
  return out;
}

WildernessImpact wilderness_impact(const EvalSet& known_only, const EvalSet& mixed,
                                   double recall_level, double iou_thresh) {
  const PRCurve known_curve = pooled_known_curve(known_only, iou_thresh);
  if (known_curve.num_gt == 0) throw InvalidArgument("wilderness_impact: no known ground truth");
  const OperatingPoint op = precision_at_recall(known_curve, recall_level);
  const PRCurve mixed_curve = pooled_known_curve(mixed, iou_thresh);

  WildernessImpact out;
  out.threshold = op.threshold;
  out.recall_reached = op.recall_reached;
  out.precision_known = op.precision;
  out.precision_mixed = precision_at_threshold(mixed_curve, op.threshold);
  if (out.precision_mixed == 0.0) {
    throw InvalidArgument("wilderness_impact: zero precision on the mixed set");
  }
  out.wi = out.precision_known / out.precision_mixed - 1.0;
  return out;
}

std::size_t absolute_open_set_error(const EvalSet& eval, double iou_thresh, double score_thresh) {
  std::vector<DetectionRecord> dets;
  for (const auto& d : eval.detections) {
    if (d.label != kUnknownClass) dets.push_back(d);
  }
  const MatchResult m = greedy_match(dets, eval.ground_truths, iou_thresh, false);
  std::map<ImageId, std::vector<bool>> hit;
  std::size_t count = 0;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const DetectionRecord& d = dets[i];
    if (m.true_positive[i] || d.confidence < score_thresh) continue;
    const auto& list = gts_of(eval.ground_truths, d.image_id);
    const BestGt b = best_gt(d, list);
    if (b.index < 0 || b.overlap < iou_thresh) continue;
    const auto g = static_cast<std::size_t>(b.index);
    if (list[g].label != kUnknownClass) continue;
    auto& flags = hit[d.image_id];
    if (flags.empty()) flags.assign(list.size(), false);
    if (!flags[g]) {
      flags[g] = true;
      ++count;
    }
  }
  return count;
}

void EvalConfig::validate() const {
  if (!(iou_thresh > 0.0 && iou_thresh <= 1.0)) throw InvalidArgument("eval.iou_thresh must lie in (0, 1]");
  if (!(wi_recall > 0.0 && wi_recall <= 1.0)) throw InvalidArgument("eval.wi_recall must lie in (0, 1]");
  if (!(aose_score_thresh >= 0.0 && aose_score_thresh <= 1.0)) {
    throw InvalidArgument("eval.aose_score_thresh must lie in [0, 1]");
  }
}

MetricsReport evaluate_task(int task_id, const EvalSet& mixed, std::span<const ClassId> previous,
                            std::span<const ClassId> current, const EvalConfig& cfg) {
  MetricsReport r;
  r.task_id = task_id;
  r.flags.push_back("wi_threshold_anchored_on_known_only");

  auto safe_map = [&](std::span<const ClassId> classes) -> std::optional<double> {
    if (classes.empty()) return std::nullopt;
    try {
      return map_over(classes, mixed, cfg.iou_thresh);
    } catch (const InvalidArgument&) {
      return std::nullopt;
    }
  };
  std::vector<ClassId> both(previous.begin(), previous.end());
  both.insert(both.end(), current.begin(), current.end());
  r.map_prev = safe_map(previous);
  r.map_curr = safe_map(current);
  r.map_both = safe_map(both);

  if (mixed.num_unknown_gts() == 0) r.flags.push_back("no_unknown_ground_truth");
  try {
    const EvalSet known_only = known_only_view(mixed, cfg.iou_thresh);
    const WildernessImpact wi = wilderness_impact(known_only, mixed, cfg.wi_recall, cfg.iou_thresh);
    r.wi = wi.wi;
    if (!wi.recall_reached) r.flags.push_back("wi_recall_not_reached");
  } catch (const InvalidArgument&) {
    r.flags.push_back("wi_degenerate");
  }
  r.a_ose = absolute_open_set_error(mixed, cfg.iou_thresh, cfg.aose_score_thresh);
  return r;
}

}  // namespace owl::eval

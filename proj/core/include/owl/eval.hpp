#pragma once

// Detection evaluation: greedy confidence-ordered matching, precision/recall
// curves, all-point interpolated AP, mAP over class groups, Wilderness Impact
// and Absolute Open-Set Error.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "owl/boxes.hpp"
#include "owl/common.hpp"

namespace owl::eval {

struct DetectionRecord {
  ImageId image_id = 0;
  boxes::Box box;
  ClassId label = kUnknownClass;
  double confidence = 0.0;
};

using GroundTruthMap = std::map<ImageId, std::vector<boxes::AnnotatedBox>>;

/// Detections and ground truth for one evaluation. Ground-truth labels are
/// either in `known_set` or 0 (unknown).
struct EvalSet {
  std::vector<DetectionRecord> detections;
  GroundTruthMap ground_truths;
  std::vector<ClassId> known_set;

  void validate() const;
  std::size_t num_unknown_gts() const;
};

struct MatchResult {
  std::vector<bool> true_positive;  // parallel to the detection input
  std::map<ImageId, std::vector<bool>> gt_matched;
};

/// Processes detections by descending confidence (ties by input order). A
/// detection is a true positive iff its best-IoU unmatched same-label gt has
/// IoU >= iou_thresh; that gt is then consumed.
MatchResult match_detections(std::span<const DetectionRecord> detections,
                             const GroundTruthMap& ground_truths, double iou_thresh);

struct PRPoint {
  double recall = 0.0;
  double precision = 0.0;
  double threshold = 0.0;  // detections with confidence >= threshold are kept
  std::size_t true_positives = 0;
  std::size_t detections = 0;
};

/// Operating points in descending threshold order, one per distinct
/// confidence value.
struct PRCurve {
  std::vector<PRPoint> points;
  std::size_t num_gt = 0;
};

/// Curve for detections labelled `c` against gts labelled `c`.
PRCurve class_pr_curve(const EvalSet& eval, ClassId c, double iou_thresh);

/// Pools every known-labelled detection across classes. A detection whose
/// best-IoU gt is an unknown object at IoU >= iou_thresh is a false positive
/// and never consumes a known gt.
PRCurve pooled_known_curve(const EvalSet& eval, double iou_thresh);

/// Area under the precision envelope (precision at recall r is the maximum
/// precision at any recall >= r). nullopt when the class has no gts.
std::optional<double> average_precision(const PRCurve& curve);

/// Mean of the defined per-class APs. Throws if none is defined.
double map_over(std::span<const ClassId> classes, const EvalSet& eval, double iou_thresh);

struct OperatingPoint {
  double precision = 0.0;
  double recall = 0.0;
  double threshold = 0.0;
  bool recall_reached = true;
};

/// Precision at the first (highest-threshold) point whose recall >= R. When
/// the curve never reaches R, falls back to the first point at maximum
/// recall and clears recall_reached.
OperatingPoint precision_at_recall(const PRCurve& curve, double recall_level);

/// Precision over detections with confidence >= threshold.
double precision_at_threshold(const PRCurve& curve, double threshold);

/// The mixed set with unknown gts removed, and with the detections that land
/// on an unknown gt (best-IoU gt is unknown, IoU >= iou_thresh) removed.
EvalSet known_only_view(const EvalSet& mixed, double iou_thresh);

struct WildernessImpact {
  double wi = 0.0;
  double precision_known = 0.0;
  double precision_mixed = 0.0;
  double threshold = 0.0;
  bool recall_reached = true;
};

/// WI = P_K / P_{K+U} - 1. The operating threshold is chosen on the
/// known-only curve at recall R and held fixed for the mixed evaluation.
WildernessImpact wilderness_impact(const EvalSet& known_only, const EvalSet& mixed,
                                   double recall_level, double iou_thresh);

/// Number of unknown gts hit by at least one known-labelled detection with
/// confidence >= score_thresh that is not a true positive and whose best-IoU
/// gt is that unknown object at IoU >= iou_thresh.
std::size_t absolute_open_set_error(const EvalSet& eval, double iou_thresh, double score_thresh);

struct EvalConfig {
  double iou_thresh = 0.5;
  double wi_recall = 0.8;
  double aose_score_thresh = 0.05;

  void validate() const;
};

/// Per-task metrics laid out as previously-known / current-known / both.
struct MetricsReport {
  int task_id = 0;
  std::optional<double> wi;
  std::size_t a_ose = 0;
  std::optional<double> map_prev;
  std::optional<double> map_curr;
  std::optional<double> map_both;
  std::vector<std::string> flags;
};

/// Computes a MetricsReport for `mixed`. `previous` and `current` partition
/// the known set; either may be empty.
MetricsReport evaluate_task(int task_id, const EvalSet& mixed, std::span<const ClassId> previous,
                            std::span<const ClassId> current, const EvalConfig& cfg);

}  // namespace owl::eval

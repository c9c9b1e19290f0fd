#pragma once

// Axis-aligned boxes in center/extent form, IoU, and the auto-labelling rule
// that pseudo-labels the highest-objectness background proposals as unknown.

#include <span>
#include <vector>

#include "owl/common.hpp"

namespace owl::boxes {

struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;

  double x_min() const { return cx - 0.5 * w; }
  double x_max() const { return cx + 0.5 * w; }
  double y_min() const { return cy - 0.5 * h; }
  double y_max() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  void validate() const;

  static Box from_corners(double x0, double y0, double x1, double y1);

  friend bool operator==(const Box&, const Box&) = default;
};

struct AnnotatedBox {
  Box box;
  ClassId label = kUnknownClass;

  friend bool operator==(const AnnotatedBox&, const AnnotatedBox&) = default;
};

struct Proposal {
  Box box;
  double objectness = 0.0;
};

/// Intersection over union, in [0, 1].
double iou(const Box& a, const Box& b);

/// Largest IoU of `box` against `gts`; 0 when `gts` is empty.
double max_iou(const Box& box, std::span<const AnnotatedBox> gts);

/// True iff the proposal's max IoU against every labelled box is below
/// `overlap_thresh`.
bool is_background(const Proposal& p, std::span<const AnnotatedBox> gts, double overlap_thresh);

/// Indices of the top-k background proposals by descending objectness; ties
/// keep input order.
std::vector<std::size_t> select_unknown_proposals(std::span<const Proposal> proposals,
                                                  std::span<const AnnotatedBox> gts,
                                                  std::size_t k, double overlap_thresh);

/// select_unknown_proposals, returned as unknown-labelled boxes.
std::vector<AnnotatedBox> auto_label_unknowns(std::span<const Proposal> proposals,
                                              std::span<const AnnotatedBox> gts, std::size_t k,
                                              double overlap_thresh);

}  // namespace owl::boxes

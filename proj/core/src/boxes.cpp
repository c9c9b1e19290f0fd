#include "owl/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace owl::boxes {

void Box::validate() const {
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw InvalidArgument("box center must be finite");
  if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(w) || !std::isfinite(h)) {
    throw InvalidArgument("box extents must be positive and finite");
  }
}

Box Box::from_corners(double x0, double y0, double x1, double y1) {
  const Box b{0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
  b.validate();
  return b;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double max_iou(const Box& box, std::span<const AnnotatedBox> gts) {
  double best = 0.0;
  for (const auto& gt : gts) best = std::max(best, iou(box, gt.box));
  return best;
}

bool is_background(const Proposal& p, std::span<const AnnotatedBox> gts, double overlap_thresh) {
  if (!(overlap_thresh >= 0.0 && overlap_thresh < 1.0)) {
    throw InvalidArgument("overlap threshold must lie in [0, 1)");
  }
  return max_iou(p.box, gts) < overlap_thresh;
}

std::vector<std::size_t> select_unknown_proposals(std::span<const Proposal> proposals,
                                                  std::span<const AnnotatedBox> gts,
                                                  std::size_t k, double overlap_thresh) {
  std::vector<std::size_t> background;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    if (is_background(proposals[i], gts, overlap_thresh)) background.push_back(i);
  }
  std::stable_sort(background.begin(), background.end(), [&](std::size_t a, std::size_t b) {
    return proposals[a].objectness > proposals[b].objectness;
  });
  if (background.size() > k) background.resize(k);
  return background;
}

std::vector<AnnotatedBox> auto_label_unknowns(std::span<const Proposal> proposals,
                                              std::span<const AnnotatedBox> gts, std::size_t k,
                                              double overlap_thresh) {
  std::vector<AnnotatedBox> out;
  for (std::size_t i : select_unknown_proposals(proposals, gts, k, overlap_thresh)) {
    out.push_back(AnnotatedBox{proposals[i].box, kUnknownClass});
  }
  return out;
}

}  // namespace owl::boxes

#include "mhas/core.hpp"

#include <algorithm>
#include <cmath>

namespace mhas {

double Annotation::visibility() const {
  if (!visible) return 1.0;
  return visible->area() / full.area();
}

LevelGrid LevelGrid::for_image_height(int image_height, int b_h) {
  if (b_h <= 0) throw ValidationError("b_h must be a positive integer, got " + std::to_string(b_h));
  if (image_height <= 0)
    throw ValidationError("image height must be positive, got " + std::to_string(image_height));
  return LevelGrid{b_h, (image_height + b_h - 1) / b_h};
}

long LevelGrid::clamp(long level) const {
  return std::clamp(level, 1L, static_cast<long>(n_levels));
}

void validate_box(const BBox& box) {
  if (!std::isfinite(box.x) || !std::isfinite(box.y) || !std::isfinite(box.w) ||
      !std::isfinite(box.h))
    throw ValidationError("box coordinates must be finite");
  if (!(box.w > 0.0)) throw ValidationError("box width must be > 0");
  if (!(box.h > 0.0)) throw ValidationError("box height must be > 0");
}

void validate_annotation(const Annotation& ann) {
  validate_box(ann.full);
  if (!ann.visible) return;
  validate_box(*ann.visible);
  const BBox& v = *ann.visible;
  const BBox& f = ann.full;
  if (v.x < f.x || v.y < f.y || v.right() > f.right() || v.bottom() > f.bottom())
    throw ValidationError("visible box must be contained in the full box");
}

double intersection_area(const BBox& a, const BBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

namespace {

// Area from edge differences, so that iou(a, a) is exactly 1.
double edge_area(const BBox& b) { return (b.right() - b.x) * (b.bottom() - b.y); }

}  // namespace

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (edge_area(a) + edge_area(b) - inter);
}

long foot_level(const BBox& box, int b_h) {
  return static_cast<long>(std::ceil(box.bottom() / static_cast<double>(b_h)));
}

long foot_level(const BBox& box, const LevelGrid& grid) { return foot_level(box, grid.b_h); }

}  // namespace mhas

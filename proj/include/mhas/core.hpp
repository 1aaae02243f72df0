#ifndef MHAS_CORE_HPP_
#define MHAS_CORE_HPP_

#include <optional>
#include <stdexcept>
#include <string>

namespace mhas {

/// Failure caused by invalid input values or contract violations (CLI exit 1).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure to read or write a file (CLI exit 2).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box in pixel coordinates, origin at the top-left corner.
/// Coordinates are real-valued; boxes may extend past the image border.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Detection {
  BBox box;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct Annotation {
  BBox full;
  std::optional<BBox> visible;

  /// Visible area over full area; 1.0 when no visible box is annotated.
  double visibility() const;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct ImageMeta {
  std::string image_id;
  int width = 0;
  int height = 0;

  friend bool operator==(const ImageMeta&, const ImageMeta&) = default;
};

/// Horizontal bands of `b_h` pixel rows, indexed 1..n_levels from the top.
/// Level m covers rows in ((m - 1) * b_h, m * b_h].
struct LevelGrid {
  int b_h = 4;
  int n_levels = 0;

  static LevelGrid for_image_height(int image_height, int b_h);

  bool contains(long level) const { return level >= 1 && level <= n_levels; }
  long clamp(long level) const;

  friend bool operator==(const LevelGrid&, const LevelGrid&) = default;
};

/// Throws ValidationError when w <= 0 or h <= 0.
void validate_box(const BBox& box);

/// Throws ValidationError when the visible box is not contained in the full box.
void validate_annotation(const Annotation& ann);

double intersection_area(const BBox& a, const BBox& b);

/// Intersection over union; 0 for disjoint boxes, 1 for identical ones.
double iou(const BBox& a, const BBox& b);

/// Level containing the bottom edge: ceil((y + h) / b_h). Not clamped.
long foot_level(const BBox& box, const LevelGrid& grid);
long foot_level(const BBox& box, int b_h);

}  // namespace mhas

#endif  // MHAS_CORE_HPP_

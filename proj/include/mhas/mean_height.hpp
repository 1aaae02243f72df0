#ifndef MHAS_MEAN_HEIGHT_HPP_
#define MHAS_MEAN_HEIGHT_HPP_

// Per-level mean pedestrian height.
//
// Two generators are provided. The manual generator averages annotated
// heights per foot level over a training set that shares one camera eye
// level. The perspective generator fits the linear map
//
//     mean_height(m) = a * m + b
//
// by ordinary least squares of box height against foot level, either per
// image (with qualification rules deciding whether the image yields usable
// coefficients) or pooled over a whole dataset.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mhas/core.hpp"
#include "mhas/data_io.hpp"

namespace mhas {

struct MeanHeightProfile {
  LevelGrid grid;
  std::vector<double> values;         // index m - 1
  std::vector<std::size_t> support;   // annotations averaged at each level

  /// Value at 1-based level m; 0 outside the grid.
  double at(long m) const;
};

/// How empty levels of a manual profile are filled.
///   none:   empty levels stay 0.
///   linear: levels above the topmost populated level are 0; gaps between
///           populated levels are linearly interpolated; levels below the
///           lowest populated one are extrapolated from the last two
///           populated levels (constant if only one), clamped at 0.
enum class FillPolicy { none, linear };

FillPolicy parse_fill_policy(const std::string& name);
const char* to_string(FillPolicy policy);

/// Averages annotation heights per foot level across the dataset. Boxes whose
/// foot level falls outside the grid do not contribute. All images must have
/// the same height and match the grid.
MeanHeightProfile build_manual_profile(const Dataset& ds, const LevelGrid& grid,
                                       FillPolicy fill = FillPolicy::linear);

struct PerspectiveCoefficients {
  double a = 0.0;  // pixels per level
  double b = 0.0;  // pixels
  double mean_relative_error = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_distinct_levels = 0;
};

struct QualificationRules {
  std::size_t min_samples = 3;
  std::size_t min_distinct_levels = 3;
  double min_slope = 0.1;
  double max_mean_rel_err = 0.4;
};

enum class RejectionRule {
  none = 0,
  too_few_samples = 1,   // rule (1)
  slope_too_small = 2,   // rule (2)
  error_too_large = 3,   // rule (3)
};

const char* to_string(RejectionRule rule);

struct ImageFit {
  PerspectiveCoefficients coeffs;  // populated whenever a line is defined
  RejectionRule rejected = RejectionRule::none;

  bool accepted() const { return rejected == RejectionRule::none; }
};

/// Fits one image's annotations and applies the qualification rules in order.
ImageFit fit_image_coefficients(std::span<const Annotation> anns, const LevelGrid& grid,
                                const QualificationRules& rules = {});

/// Single fit pooling every annotation in the dataset. Throws ValidationError
/// when fewer than 3 samples or 3 distinct levels are available.
PerspectiveCoefficients fit_global_coefficients(const Dataset& ds, const LevelGrid& grid);

/// Crop-rescale-paste augmentation along the vertical axis: the source rows
/// starting at `crop_top` spanning `crop_height` are rescaled to
/// `scaled_height` rows and pasted at `paste_top` in the output frame.
struct AugmentTransform {
  double crop_top = 0.0;
  double paste_top = 0.0;
  double crop_height = 1.0;
  double scaled_height = 1.0;

  /// Parameters whose coefficient transform undoes this one's.
  AugmentTransform inverse() const;
};

/// a = a_o; b = (crop_height / scaled_height) * b_o + a_o * (crop_top - paste_top).
std::pair<double, double> transform_coefficients(double a_o, double b_o, const AugmentTransform& t);

/// h(m) = max(0, a * m + b) for m = 1..n_levels, with zero support.
MeanHeightProfile realize_profile(double a, double b, const LevelGrid& grid);
inline MeanHeightProfile realize_profile(const PerspectiveCoefficients& c, const LevelGrid& grid) {
  return realize_profile(c.a, c.b, grid);
}

ProfileRecord to_record(const MeanHeightProfile& p);
MeanHeightProfile mean_height_from_record(const ProfileRecord& rec);

}  // namespace mhas

#endif  // MHAS_MEAN_HEIGHT_HPP_

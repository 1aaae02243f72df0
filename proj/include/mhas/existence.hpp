#ifndef MHAS_EXISTENCE_HPP_
#define MHAS_EXISTENCE_HPP_

#include <cstddef>
#include <span>
#include <vector>

#include "mhas/core.hpp"
#include "mhas/data_io.hpp"

namespace mhas {

/// Per-level plausibility in [0, 1] that a pedestrian's feet lie on a level.
struct ExistenceProfile {
  LevelGrid grid;
  std::vector<double> values;  // index m - 1

  /// Value at 1-based level m; 0 outside the grid.
  double at(long m) const;
};

struct PositiveLevel {
  long level = 0;
  double mean_height = 0.0;
};

/// Binary per-level target: 1 at every level holding an annotation foot.
struct GtExistenceVector {
  LevelGrid grid;
  std::vector<int> y;
  std::vector<PositiveLevel> positive_levels;  // ascending level order

  std::size_t positives() const { return positive_levels.size(); }
};

struct KernelParams {
  double c_sigma = 0.25;     // sigma in levels per level-normalized height
  double sigma_floor = 1.0;  // levels
};

struct GaussianMask {
  LevelGrid grid;
  std::vector<double> values;
};

struct LossParams {
  double beta = 4.0;
  double gamma = 2.0;
};

/// Kernel width in levels for a pedestrian of pixel height h.
double kernel_sigma(double height, int b_h, const KernelParams& kp);

/// Foot levels are clamped into [1, n_levels].
GtExistenceVector build_gt_vector(std::span<const Annotation> anns, const LevelGrid& grid);

/// Pointwise max over positive levels k of exp(-(m - k)^2 / (2 sigma_k^2)).
GaussianMask build_gaussian_mask(const GtExistenceVector& gt, const KernelParams& kp = {});

/// Sum of one Gaussian kernel per annotation foot, scaled so its peak is 1.
/// Kernels are accumulated in sorted order so the result does not depend on
/// annotation order or on how the dataset is sharded.
ExistenceProfile build_statistical_profile(const Dataset& ds, const LevelGrid& grid,
                                           const KernelParams& kp = {});

/// Focal existence loss over one image's levels. Normalized by the number of
/// positive levels, or by 1 when there are none. Throws ValidationError when
/// lengths differ or a prediction lies outside (0, 1).
double existence_loss(std::span<const double> predicted, const GtExistenceVector& gt,
                      const GaussianMask& mask, const LossParams& params = {});

ProfileRecord to_record(const ExistenceProfile& p);
ExistenceProfile existence_from_record(const ProfileRecord& rec);

}  // namespace mhas

#endif  // MHAS_EXISTENCE_HPP_

#ifndef MHAS_SUPPRESSION_HPP_
#define MHAS_SUPPRESSION_HPP_

#include <functional>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "mhas/core.hpp"
#include "mhas/data_io.hpp"
#include "mhas/existence.hpp"
#include "mhas/mean_height.hpp"

namespace mhas {

/// Greedy NMS. Detections are visited by descending score (stable for ties);
/// each kept detection discards every later one with iou >= iou_threshold.
/// The result is in descending-score order.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold);

struct SuppressionParams {
  /// Relative height tolerance; kUnbounded makes the height condition always hold.
  double alpha_h = 0.5;
  double alpha_s = 0.05;
  int r = 1;
  bool use_height = true;
  bool use_existence = true;

  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();

  /// Throws ValidationError for negative thresholds/radius or both conditions off.
  void validate() const;
};

/// Throws ValidationError naming both grids when they differ.
void check_same_grid(const LevelGrid& mean_height, const LevelGrid& existence);

/// True when some level m in [m_h - r, m_h + r] inside the grid satisfies every
/// enabled condition at once:
///   height:    h_bar(m) > 0 and |h / h_bar(m) - 1| <= alpha_h
///   existence: s_e(m) >= alpha_s
bool mhas_keep(const BBox& box, const MeanHeightProfile& mean_height,
               const ExistenceProfile& existence, const SuppressionParams& params);

/// Keeps the detections accepted by mhas_keep, in input order, scores untouched.
/// A profile whose condition is disabled may be empty (grid n_levels == 0)
/// unless both are present, in which case their grids must agree.
std::vector<Detection> mhas_filter(const std::vector<Detection>& dets,
                                   const MeanHeightProfile& mean_height,
                                   const ExistenceProfile& existence,
                                   const SuppressionParams& params);

struct ImageProfiles {
  MeanHeightProfile mean_height;
  ExistenceProfile existence;
};

/// Profiles used for each image: a shared pair, optionally overridden per image
/// (for instance mean heights realized from per-image coefficients).
class ProfileSource {
 public:
  ProfileSource() = default;
  explicit ProfileSource(ImageProfiles shared) : shared_(std::move(shared)), has_shared_(true) {}

  void set_image(const std::string& image_id, ImageProfiles profiles);
  /// Throws ValidationError when neither a per-image nor a shared pair exists.
  const ImageProfiles& for_image(const std::string& image_id) const;

 private:
  ImageProfiles shared_;
  bool has_shared_ = false;
  std::unordered_map<std::string, ImageProfiles> per_image_;
};

/// mhas_filter applied to every image. Images are processed by up to
/// `threads` workers; the output does not depend on the worker count.
DetectionSet suppress_all(const DetectionSet& dets, const ProfileSource& profiles,
                          const SuppressionParams& params, int threads = 1);

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace mhas

#endif  // MHAS_SUPPRESSION_HPP_

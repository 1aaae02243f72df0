#include "mhas/existence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>

namespace mhas {

double ExistenceProfile::at(long m) const {
  if (!grid.contains(m)) return 0.0;
  return values[static_cast<std::size_t>(m - 1)];
}

double kernel_sigma(double height, int b_h, const KernelParams& kp) {
  return std::max(kp.sigma_floor, kp.c_sigma * height / static_cast<double>(b_h));
}

GtExistenceVector build_gt_vector(std::span<const Annotation> anns, const LevelGrid& grid) {
  GtExistenceVector gt;
  gt.grid = grid;
  gt.y.assign(static_cast<std::size_t>(grid.n_levels), 0);
  if (grid.n_levels == 0) return gt;
  std::map<long, std::pair<double, std::size_t>> per_level;
  for (const Annotation& a : anns) {
    auto& [sum, count] = per_level[grid.clamp(foot_level(a.full, grid))];
    sum += a.full.h;
    ++count;
  }
  for (const auto& [level, acc] : per_level) {
    gt.y[static_cast<std::size_t>(level - 1)] = 1;
    gt.positive_levels.push_back({level, acc.first / static_cast<double>(acc.second)});
  }
  return gt;
}

GaussianMask build_gaussian_mask(const GtExistenceVector& gt, const KernelParams& kp) {
  if (!(kp.c_sigma > 0.0)) throw ValidationError("c_sigma must be positive");
  GaussianMask mask;
  mask.grid = gt.grid;
  mask.values.assign(gt.y.size(), 0.0);
  for (const PositiveLevel& pos : gt.positive_levels) {
    const double sigma = kernel_sigma(pos.mean_height, gt.grid.b_h, kp);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
      const double d = static_cast<double>(i + 1) - static_cast<double>(pos.level);
      mask.values[i] = std::max(mask.values[i], std::exp(-d * d / (2.0 * sigma * sigma)));
    }
  }
  return mask;
}

ExistenceProfile build_statistical_profile(const Dataset& ds, const LevelGrid& grid,
                                           const KernelParams& kp) {
  if (!(kp.c_sigma > 0.0)) throw ValidationError("c_sigma must be positive");
  if (!(kp.sigma_floor > 0.0)) throw ValidationError("sigma_floor must be positive");
  std::vector<std::pair<long, double>> feet;  // (foot level, sigma)
  feet.reserve(ds.annotation_count());
  for (const auto& anns : ds.annotations)
    for (const Annotation& a : anns)
      feet.emplace_back(foot_level(a.full, grid), kernel_sigma(a.full.h, grid.b_h, kp));
  std::sort(feet.begin(), feet.end());

  ExistenceProfile p;
  p.grid = grid;
  p.values.assign(static_cast<std::size_t>(grid.n_levels), 0.0);
  for (const auto& [center, sigma] : feet) {
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double d = static_cast<double>(i + 1) - static_cast<double>(center);
      p.values[i] += std::exp(-d * d / (2.0 * sigma * sigma));
    }
  }
  const double peak = p.values.empty() ? 0.0 : *std::max_element(p.values.begin(), p.values.end());
  if (peak > 0.0)
    for (double& v : p.values) v /= peak;
  return p;
}

double existence_loss(std::span<const double> predicted, const GtExistenceVector& gt,
                      const GaussianMask& mask, const LossParams& params) {
  if (predicted.size() != gt.y.size() || mask.values.size() != gt.y.size())
    throw ValidationError("existence loss: length mismatch (predicted " +
                          std::to_string(predicted.size()) + ", target " +
                          std::to_string(gt.y.size()) + ", mask " +
                          std::to_string(mask.values.size()) + ")");
  double total = 0.0;
  for (std::size_t m = 0; m < predicted.size(); ++m) {
    const double p = predicted[m];
    if (!(p > 0.0 && p < 1.0))
      throw ValidationError("existence loss: prediction at level " + std::to_string(m + 1) +
                            " outside (0, 1)");
    const bool positive = gt.y[m] == 1;
    const double p_hat = positive ? p : 1.0 - p;
    const double alpha = positive ? 1.0 : std::pow(1.0 - mask.values[m], params.beta);
    total += alpha * std::pow(1.0 - p_hat, params.gamma) * std::log(p_hat);
  }
  const double k = static_cast<double>(std::max<std::size_t>(gt.positives(), 1));
  return -total / k;
}

ProfileRecord to_record(const ExistenceProfile& p) {
  return ProfileRecord{std::nullopt, p.grid, p.values, ProfileKind::existence};
}

ExistenceProfile existence_from_record(const ProfileRecord& rec) {
  if (rec.kind != ProfileKind::existence)
    throw ValidationError("expected an existence profile, got " + std::string(to_string(rec.kind)));
  return ExistenceProfile{rec.grid, rec.values};
}

}  // namespace mhas

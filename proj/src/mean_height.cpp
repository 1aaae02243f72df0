#include "mhas/mean_height.hpp"

#include <algorithm>
#include <cmath>

namespace mhas {

namespace {

struct Sample {
  double level;
  double height;
  auto operator<=>(const Sample&) const = default;
};

// Unweighted OLS of height on level. Samples are sorted first so the result
// does not depend on input order.
PerspectiveCoefficients fit_line(std::vector<Sample> samples) {
  std::sort(samples.begin(), samples.end());
  PerspectiveCoefficients c;
  c.n_samples = samples.size();
  for (std::size_t i = 0; i < samples.size(); ++i)
    if (i == 0 || samples[i].level != samples[i - 1].level) ++c.n_distinct_levels;
  if (c.n_distinct_levels < 2) return c;

  const double n = static_cast<double>(samples.size());
  double mean_m = 0.0, mean_h = 0.0;
  for (const Sample& s : samples) {
    mean_m += s.level;
    mean_h += s.height;
  }
  mean_m /= n;
  mean_h /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const Sample& s : samples) {
    const double dm = s.level - mean_m;
    sxx += dm * dm;
    sxy += dm * (s.height - mean_h);
  }
  c.a = sxy / sxx;
  c.b = mean_h - c.a * mean_m;

  double err = 0.0;
  for (const Sample& s : samples) err += std::abs(s.height - (c.a * s.level + c.b)) / s.height;
  c.mean_relative_error = err / n;
  return c;
}

std::vector<Sample> samples_of(std::span<const Annotation> anns, int b_h) {
  std::vector<Sample> out;
  out.reserve(anns.size());
  for (const Annotation& a : anns)
    out.push_back({static_cast<double>(foot_level(a.full, b_h)), a.full.h});
  return out;
}

void fill_linear(std::vector<double>& values, const std::vector<std::size_t>& support) {
  std::vector<std::size_t> populated;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (support[i] > 0) populated.push_back(i);
  if (populated.empty()) return;

  for (std::size_t k = 0; k + 1 < populated.size(); ++k) {
    const std::size_t lo = populated[k], hi = populated[k + 1];
    const double slope = (values[hi] - values[lo]) / static_cast<double>(hi - lo);
    for (std::size_t i = lo + 1; i < hi; ++i)
      values[i] = values[lo] + slope * static_cast<double>(i - lo);
  }

  const std::size_t last = populated.back();
  double slope = 0.0;
  if (populated.size() >= 2) {
    const std::size_t prev = populated[populated.size() - 2];
    slope = (values[last] - values[prev]) / static_cast<double>(last - prev);
  }
  for (std::size_t i = last + 1; i < values.size(); ++i)
    values[i] = std::max(0.0, values[last] + slope * static_cast<double>(i - last));
}

}  // namespace

double MeanHeightProfile::at(long m) const {
  if (!grid.contains(m)) return 0.0;
  return values[static_cast<std::size_t>(m - 1)];
}

FillPolicy parse_fill_policy(const std::string& name) {
  if (name == "linear") return FillPolicy::linear;
  if (name == "none") return FillPolicy::none;
  throw ValidationError("unknown fill policy '" + name + "' (expected linear or none)");
}

const char* to_string(FillPolicy policy) {
  return policy == FillPolicy::linear ? "linear" : "none";
}

const char* to_string(RejectionRule rule) {
  switch (rule) {
    case RejectionRule::none: return "accepted";
    case RejectionRule::too_few_samples: return "rule1_too_few_samples";
    case RejectionRule::slope_too_small: return "rule2_slope_too_small";
    case RejectionRule::error_too_large: return "rule3_error_too_large";
  }
  return "unknown";
}

MeanHeightProfile build_manual_profile(const Dataset& ds, const LevelGrid& grid, FillPolicy fill) {
  if (ds.empty()) throw ValidationError("manual mean height: dataset is empty");
  const int height = ds.images.front().height;
  for (const ImageMeta& img : ds.images) {
    if (img.height != height)
      throw ValidationError("manual mean height: image '" + img.image_id + "' has height " +
                            std::to_string(img.height) + ", expected " + std::to_string(height));
  }
  if (LevelGrid::for_image_height(height, grid.b_h) != grid)
    throw ValidationError("manual mean height: grid of " + std::to_string(grid.n_levels) +
                          " levels does not match image height " + std::to_string(height));

  MeanHeightProfile p;
  p.grid = grid;
  p.values.assign(static_cast<std::size_t>(grid.n_levels), 0.0);
  p.support.assign(static_cast<std::size_t>(grid.n_levels), 0);
  std::vector<double> sums(p.values.size(), 0.0);
  for (const auto& anns : ds.annotations) {
    for (const Annotation& a : anns) {
      const long m = foot_level(a.full, grid);
      if (!grid.contains(m)) continue;
      sums[static_cast<std::size_t>(m - 1)] += a.full.h;
      ++p.support[static_cast<std::size_t>(m - 1)];
    }
  }
  bool any = false;
  for (std::size_t i = 0; i < sums.size(); ++i) {
    if (p.support[i] == 0) continue;
    p.values[i] = sums[i] / static_cast<double>(p.support[i]);
    any = true;
  }
  if (!any) throw ValidationError("manual mean height: no annotation has its foot inside the image");
  if (fill == FillPolicy::linear) fill_linear(p.values, p.support);
  return p;
}

ImageFit fit_image_coefficients(std::span<const Annotation> anns, const LevelGrid& grid,
                                const QualificationRules& rules) {
  ImageFit fit;
  fit.coeffs = fit_line(samples_of(anns, grid.b_h));
  if (fit.coeffs.n_samples < rules.min_samples ||
      fit.coeffs.n_distinct_levels < rules.min_distinct_levels ||
      fit.coeffs.n_distinct_levels < 2) {
    fit.rejected = RejectionRule::too_few_samples;
  } else if (fit.coeffs.a < rules.min_slope) {
    fit.rejected = RejectionRule::slope_too_small;
  } else if (fit.coeffs.mean_relative_error > rules.max_mean_rel_err) {
    fit.rejected = RejectionRule::error_too_large;
  }
  return fit;
}

PerspectiveCoefficients fit_global_coefficients(const Dataset& ds, const LevelGrid& grid) {
  std::vector<Sample> pooled;
  pooled.reserve(ds.annotation_count());
  for (const auto& anns : ds.annotations) {
    auto s = samples_of(anns, grid.b_h);
    pooled.insert(pooled.end(), s.begin(), s.end());
  }
  PerspectiveCoefficients c = fit_line(std::move(pooled));
  if (c.n_samples < 3 || c.n_distinct_levels < 3)
    throw ValidationError("global perspective fit needs >= 3 annotations over >= 3 distinct levels (got " +
                          std::to_string(c.n_samples) + " over " +
                          std::to_string(c.n_distinct_levels) + ")");
  return c;
}

AugmentTransform AugmentTransform::inverse() const {
  const double ratio = scaled_height / crop_height;
  return AugmentTransform{ratio * paste_top, ratio * crop_top, scaled_height, crop_height};
}

std::pair<double, double> transform_coefficients(double a_o, double b_o, const AugmentTransform& t) {
  if (!(t.crop_height > 0.0) || !(t.scaled_height > 0.0))
    throw ValidationError("augmentation heights must be positive");
  return {a_o, (t.crop_height / t.scaled_height) * b_o + a_o * (t.crop_top - t.paste_top)};
}

MeanHeightProfile realize_profile(double a, double b, const LevelGrid& grid) {
  MeanHeightProfile p;
  p.grid = grid;
  p.values.resize(static_cast<std::size_t>(grid.n_levels));
  p.support.assign(p.values.size(), 0);
  for (int m = 1; m <= grid.n_levels; ++m)
    p.values[static_cast<std::size_t>(m - 1)] = std::max(0.0, a * m + b);
  return p;
}

ProfileRecord to_record(const MeanHeightProfile& p) {
  return ProfileRecord{std::nullopt, p.grid, p.values, ProfileKind::mean_height};
}

MeanHeightProfile mean_height_from_record(const ProfileRecord& rec) {
  if (rec.kind != ProfileKind::mean_height)
    throw ValidationError("expected a mean_height profile, got " + std::string(to_string(rec.kind)));
  MeanHeightProfile p;
  p.grid = rec.grid;
  p.values = rec.values;
  p.support.assign(rec.values.size(), 0);
  return p;
}

}  // namespace mhas

#include "mhas/suppression.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace mhas {

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0)
    throw ValidationError("nms: iou threshold must lie in [0, 1]");
  std::stable_sort(dets.begin(), dets.end(),
                   [](const Detection& a, const Detection& b) { return a.score > b.score; });
  std::vector<Detection> kept;
  std::vector<bool> removed(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j)
      if (!removed[j] && iou(dets[i].box, dets[j].box) >= iou_threshold) removed[j] = true;
  }
  return kept;
}

void SuppressionParams::validate() const {
  if (!use_height && !use_existence)
    throw ValidationError("suppression: at least one of the height and existence conditions must be enabled");
  if (std::isnan(alpha_h) || alpha_h < 0.0) throw ValidationError("suppression: alpha_h must be >= 0");
  if (std::isnan(alpha_s) || alpha_s < 0.0 || alpha_s > 1.0)
    throw ValidationError("suppression: alpha_s must lie in [0, 1]");
  if (r < 0) throw ValidationError("suppression: r must be >= 0");
}

void check_same_grid(const LevelGrid& mean_height, const LevelGrid& existence) {
  if (mean_height == existence) return;
  throw ValidationError("profile grid mismatch: mean height has b_h=" + std::to_string(mean_height.b_h) +
                        " n_levels=" + std::to_string(mean_height.n_levels) +
                        ", existence has b_h=" + std::to_string(existence.b_h) +
                        " n_levels=" + std::to_string(existence.n_levels));
}

namespace {

const LevelGrid& active_grid(const MeanHeightProfile& mh, const ExistenceProfile& es,
                             const SuppressionParams& params) {
  const bool have_mh = mh.grid.n_levels > 0;
  const bool have_es = es.grid.n_levels > 0;
  if (have_mh && have_es) check_same_grid(mh.grid, es.grid);
  if (params.use_height && !have_mh) throw ValidationError("suppression: height condition needs a mean height profile");
  if (params.use_existence && !have_es) throw ValidationError("suppression: existence condition needs an existence profile");
  return have_mh ? mh.grid : es.grid;
}

bool height_ok(double h, double mean, double alpha_h) {
  if (alpha_h == SuppressionParams::kUnbounded) return true;
  return mean > 0.0 && std::abs(h / mean - 1.0) <= alpha_h;
}

bool keep_on_grid(const BBox& box, const LevelGrid& grid, const MeanHeightProfile& mh,
                  const ExistenceProfile& es, const SuppressionParams& params) {
  const long m_h = foot_level(box, grid);
  const long lo = std::max(1L, m_h - params.r);
  const long hi = std::min(static_cast<long>(grid.n_levels), m_h + params.r);
  for (long m = lo; m <= hi; ++m) {
    const auto i = static_cast<std::size_t>(m - 1);
    if (params.use_height && !height_ok(box.h, mh.values[i], params.alpha_h)) continue;
    if (params.use_existence && !(es.values[i] >= params.alpha_s)) continue;
    return true;
  }
  return false;
}

}  // namespace

bool mhas_keep(const BBox& box, const MeanHeightProfile& mean_height,
               const ExistenceProfile& existence, const SuppressionParams& params) {
  params.validate();
  const LevelGrid& grid = active_grid(mean_height, existence, params);
  return keep_on_grid(box, grid, mean_height, existence, params);
}

std::vector<Detection> mhas_filter(const std::vector<Detection>& dets,
                                   const MeanHeightProfile& mean_height,
                                   const ExistenceProfile& existence,
                                   const SuppressionParams& params) {
  params.validate();
  const LevelGrid& grid = active_grid(mean_height, existence, params);
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets)
    if (keep_on_grid(d.box, grid, mean_height, existence, params)) kept.push_back(d);
  return kept;
}

void ProfileSource::set_image(const std::string& image_id, ImageProfiles profiles) {
  per_image_[image_id] = std::move(profiles);
}

const ImageProfiles& ProfileSource::for_image(const std::string& image_id) const {
  auto it = per_image_.find(image_id);
  if (it != per_image_.end()) return it->second;
  if (!has_shared_) throw ValidationError("no profiles for image '" + image_id + "'");
  return shared_;
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(threads, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

DetectionSet suppress_all(const DetectionSet& dets, const ProfileSource& profiles,
                          const SuppressionParams& params, int threads) {
  params.validate();
  const auto& ids = dets.image_ids();
  std::vector<std::vector<Detection>> kept(ids.size());
  parallel_for(ids.size(), threads, [&](std::size_t i) {
    const ImageProfiles& p = profiles.for_image(ids[i]);
    kept[i] = mhas_filter(dets.for_image(ids[i]), p.mean_height, p.existence, params);
  });
  DetectionSet out;
  for (std::size_t i = 0; i < ids.size(); ++i) out.set(ids[i], std::move(kept[i]));
  return out;
}

}  // namespace mhas

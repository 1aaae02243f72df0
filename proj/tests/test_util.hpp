#ifndef MHAS_TESTS_TEST_UTIL_HPP_
#define MHAS_TESTS_TEST_UTIL_HPP_

// Generators and brute-force oracles shared by the unit and acceptance tests.
// The oracles are deliberately literal and do not call the code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mhas/core.hpp"
#include "mhas/data_io.hpp"
#include "mhas/suppression.hpp"

namespace mhas::testing {

inline BBox random_box(std::mt19937_64& rng, double max_xy = 600.0, double max_wh = 200.0) {
  std::uniform_real_distribution<double> pos(-20.0, max_xy);
  std::uniform_real_distribution<double> size(1.0, max_wh);
  return BBox{pos(rng), pos(rng), size(rng), size(rng)};
}

inline Annotation ann(double x, double y, double w, double h) { return Annotation{BBox{x, y, w, h}, std::nullopt}; }

inline Dataset one_image(std::vector<Annotation> anns, int height = 480, const std::string& id = "img") {
  Dataset ds;
  ds.add_image(ImageMeta{id, 640, height}, std::move(anns));
  return ds;
}

// Ceiling computed by counting whole bands, independent of std::ceil on a quotient.
inline long level_by_counting(double bottom, int b_h) {
  long m = 0;
  while (static_cast<double>(m) * b_h < bottom) ++m;
  if (bottom <= 0.0) {
    m = 0;
    while (static_cast<double>(m - 1) * b_h >= bottom) --m;
  }
  return m;
}

// Literal group-by-level mean over every annotation whose foot lies in the grid.
inline std::map<long, double> group_by_mean(const Dataset& ds, int b_h, int n_levels) {
  std::map<long, std::vector<double>> groups;
  for (const auto& anns : ds.annotations)
    for (const Annotation& a : anns) {
      const long m = level_by_counting(a.full.y + a.full.h, b_h);
      if (m >= 1 && m <= n_levels) groups[m].push_back(a.full.h);
    }
  std::map<long, double> out;
  for (auto& [m, hs] : groups) {
    double s = 0.0;
    for (double h : hs) s += h;
    out[m] = s / static_cast<double>(hs.size());
  }
  return out;
}

// OLS through the 2x2 normal equations on raw sums.
inline std::pair<double, double> normal_equations_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  long double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const long double n = static_cast<long double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += static_cast<long double>(xs[i]) * xs[i];
    sxy += static_cast<long double>(xs[i]) * ys[i];
  }
  const long double det = n * sxx - sx * sx;
  const long double a = (n * sxy - sx * sy) / det;
  const long double b = (sy - a * sx) / n;
  return {static_cast<double>(a), static_cast<double>(b)};
}

// Scans every level of the grid and keeps the box if any level within r of its
// foot passes both enabled inequalities.
inline bool scan_levels_keep(const BBox& box, const std::vector<double>& mh, const std::vector<double>& es,
                             int b_h, const SuppressionParams& p) {
  const long foot = testing::level_by_counting(box.y + box.h, b_h);
  for (long m = 1; m <= static_cast<long>(mh.size()); ++m) {
    if (m < foot - p.r || m > foot + p.r) continue;
    const double hbar = mh[static_cast<std::size_t>(m - 1)];
    const double s = es[static_cast<std::size_t>(m - 1)];
    const bool unbounded = std::isinf(p.alpha_h);
    const bool h_ok = !p.use_height || unbounded ||
                      (hbar > 0.0 && box.h / hbar - 1.0 <= p.alpha_h && 1.0 - box.h / hbar <= p.alpha_h);
    const bool s_ok = !p.use_existence || s >= p.alpha_s;
    if (h_ok && s_ok) return true;
  }
  return false;
}

// Enumerates every partial injective assignment of detections to ground truths
// with iou >= thr and returns the one whose per-detection iou vector, in
// descending score order, is lexicographically largest.
inline std::vector<long> exhaustive_assignment(const std::vector<Detection>& dets, const std::vector<Annotation>& gts,
                                        double thr) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<long> best(dets.size(), -1), cur(dets.size(), -1);
  std::vector<double> best_key(dets.size(), -1.0);
  std::vector<bool> used(gts.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t k) {
    if (k == order.size()) {
      std::vector<double> key;
      for (std::size_t i : order) key.push_back(cur[i] < 0 ? 0.0 : iou(dets[i].box, gts[cur[i]].full));
      if (key > best_key) {
        best_key = key;
        best = cur;
      }
      return;
    }
    const std::size_t d = order[k];
    cur[d] = -1;
    rec(k + 1);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (used[g] || iou(dets[d].box, gts[g].full) < thr) continue;
      used[g] = true;
      cur[d] = static_cast<long>(g);
      rec(k + 1);
      used[g] = false;
      cur[d] = -1;
    }
  };
  rec(0);
  return best;
}

inline std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream os;
  write_dataset(os, ds);
  return os.str();
}

inline std::string serialize_detections(const DetectionSet& d) {
  std::ostringstream os;
  write_detections(os, d);
  return os.str();
}

}  // namespace mhas::testing

#endif  // MHAS_TESTS_TEST_UTIL_HPP_

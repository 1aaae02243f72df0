#include "mhas/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>

#include "json.hpp"

namespace mhas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> by_descending_score(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

}  // namespace

bool SubsetSpec::contains(const Annotation& ann) const {
  const double h = ann.full.h;
  const double v = ann.visibility();
  return h >= min_height && h <= max_height && v >= min_visibility && v <= max_visibility;
}

const std::vector<SubsetSpec>& builtin_subsets() {
  static const std::vector<SubsetSpec> kSubsets = {
      {"Reasonable", 50.0, kInf, 0.65, kInf},
      {"Small", 50.0, 75.0, 0.65, kInf},
      {"Heavy", 50.0, kInf, 0.2, 0.65},
      {"All", 20.0, kInf, 0.2, kInf},
  };
  return kSubsets;
}

const SubsetSpec& subset_by_name(const std::string& name) {
  for (const SubsetSpec& s : builtin_subsets())
    if (s.name == name) return s;
  throw ValidationError("unknown subset '" + name + "' (expected Reasonable, Small, Heavy or All)");
}

std::vector<SubsetSpec> parse_subsets(const std::string& names) {
  std::vector<SubsetSpec> out;
  std::stringstream ss(names);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(subset_by_name(item));
  }
  if (out.empty()) throw ValidationError("no subsets given");
  return out;
}

std::size_t MatchResult::count(DetLabel l) const {
  return static_cast<std::size_t>(std::count(det_labels.begin(), det_labels.end(), l));
}

std::size_t MatchResult::count(GtLabel l) const {
  return static_cast<std::size_t>(std::count(gt_labels.begin(), gt_labels.end(), l));
}

MatchResult match_image(std::span<const Detection> dets, std::span<const Annotation> gts,
                        const SubsetSpec& subset, const MatchParams& params) {
  MatchResult res;
  res.det_labels.assign(dets.size(), DetLabel::fp);
  res.det_match.assign(dets.size(), -1);
  res.det_scores.reserve(dets.size());
  for (const Detection& d : dets) res.det_scores.push_back(d.score);
  res.gt_labels.resize(gts.size());
  for (std::size_t j = 0; j < gts.size(); ++j)
    res.gt_labels[j] = subset.contains(gts[j]) ? GtLabel::missed : GtLabel::ignore;

  for (std::size_t i : by_descending_score(dets)) {
    const BBox& box = dets[i].box;
    long best = -1;
    double best_iou = -1.0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (res.gt_labels[j] != GtLabel::missed) continue;
      const double o = iou(box, gts[j].full);
      if (o >= params.iou_threshold && o > best_iou) {
        best = static_cast<long>(j);
        best_iou = o;
      }
    }
    if (best >= 0) {
      res.gt_labels[static_cast<std::size_t>(best)] = GtLabel::matched;
      res.det_labels[i] = DetLabel::tp;
      res.det_match[i] = best;
      continue;
    }
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (res.gt_labels[j] != GtLabel::ignore) continue;
      if (intersection_area(box, gts[j].full) / box.area() >= params.ignore_overlap) {
        res.det_labels[i] = DetLabel::ignored;
        break;
      }
    }
  }
  return res;
}

std::vector<double> CurveParams::reference_points() const {
  if (n_refs < 1) throw ValidationError("need at least one FPPI reference point");
  if (!(ref_min > 0.0) || !(ref_max >= ref_min))
    throw ValidationError("FPPI reference range must satisfy 0 < min <= max");
  std::vector<double> refs(static_cast<std::size_t>(n_refs));
  if (n_refs == 1) {
    refs[0] = ref_max;
    return refs;
  }
  const double lo = std::log10(ref_min), hi = std::log10(ref_max);
  for (int k = 0; k < n_refs; ++k)
    refs[static_cast<std::size_t>(k)] = std::pow(10.0, lo + (hi - lo) * k / (n_refs - 1));
  return refs;
}

MissRateSummary log_average_miss_rate(std::span<const MatchResult> per_image, std::size_t n_images,
                                      const CurveParams& params) {
  if (n_images == 0) throw ValidationError("log-average miss rate: no images");
  if (!(params.floor > 0.0)) throw ValidationError("log-average miss rate: floor must be positive");
  MissRateSummary out;
  std::vector<std::pair<double, bool>> scored;  // (score, is_tp)
  for (const MatchResult& m : per_image) {
    out.n_gt += m.count(GtLabel::matched) + m.count(GtLabel::missed);
    for (std::size_t i = 0; i < m.det_labels.size(); ++i)
      if (m.det_labels[i] != DetLabel::ignored)
        scored.emplace_back(m.det_scores[i], m.det_labels[i] == DetLabel::tp);
  }
  if (out.n_gt == 0) throw ValidationError("log-average miss rate: no ground truth in subset");
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const double n_gt = static_cast<double>(out.n_gt);
  const double n_img = static_cast<double>(n_images);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored[i].second ? tp : fp)++;
    if (i + 1 < scored.size() && scored[i + 1].first == scored[i].first) continue;
    out.curve.push_back({scored[i].first, static_cast<double>(fp) / n_img,
                         1.0 - static_cast<double>(tp) / n_gt});
  }

  double log_sum = 0.0;
  for (double ref : params.reference_points()) {
    double miss = 1.0;
    for (const CurvePoint& p : out.curve) {
      if (p.fppi > ref) break;
      miss = p.miss_rate;
    }
    out.sampled_miss.push_back(miss);
    log_sum += std::log(std::max(miss, params.floor));
  }
  out.mr2 = std::exp(log_sum / static_cast<double>(out.sampled_miss.size()));
  return out;
}

const SubsetReport& EvalReport::at(const std::string& name) const {
  for (const SubsetReport& s : subsets)
    if (s.name == name) return s;
  throw ValidationError("subset '" + name + "' was not evaluated");
}

EvalReport evaluate(const DetectionSet& dets, const Dataset& ds, std::span<const SubsetSpec> subsets,
                    const EvalParams& params) {
  for (const std::string& id : dets.image_ids())
    if (!ds.index_of(id) && !dets.for_image(id).empty())
      throw ValidationError("detections reference unknown image_id '" + id + "'");
  EvalReport report;
  for (const SubsetSpec& subset : subsets) {
    SubsetReport sr;
    sr.name = subset.name;
    std::vector<MatchResult> matches;
    matches.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      const auto& list = dets.for_image(ds.images[i].image_id);
      matches.push_back(match_image(list, ds.annotations[i], subset, params.match));
      const MatchResult& m = matches.back();
      sr.tp += m.count(DetLabel::tp);
      sr.fp += m.count(DetLabel::fp);
      sr.ignored += m.count(DetLabel::ignored);
      sr.n_gt += m.count(GtLabel::matched) + m.count(GtLabel::missed);
      sr.n_ignore_gt += m.count(GtLabel::ignore);
    }
    if (sr.n_gt == 0) {
      sr.error = "no ground truth in subset " + subset.name;
    } else {
      MissRateSummary summary = log_average_miss_rate(matches, ds.size(), params.curve);
      sr.defined = true;
      sr.mr2 = summary.mr2;
      sr.curve = std::move(summary.curve);
      sr.recall = static_cast<double>(sr.tp) / static_cast<double>(sr.n_gt);
    }
    report.subsets.push_back(std::move(sr));
  }
  return report;
}

void print_report_table(std::ostream& out, const EvalReport& report) {
  char line[160];
  std::snprintf(line, sizeof line, "%-12s %9s %9s %7s %7s %7s\n", "subset", "MR-2(%)", "recall(%)",
                "TP", "FP", "n_gt");
  out << line;
  for (const SubsetReport& s : report.subsets) {
    if (!s.defined) {
      std::snprintf(line, sizeof line, "%-12s %9s %9s %7zu %7zu %7zu\n", s.name.c_str(), "n/a", "n/a",
                    s.tp, s.fp, s.n_gt);
    } else {
      std::snprintf(line, sizeof line, "%-12s %9.2f %9.2f %7zu %7zu %7zu\n", s.name.c_str(),
                    100.0 * s.mr2, 100.0 * s.recall, s.tp, s.fp, s.n_gt);
    }
    out << line;
  }
}

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["subsets"] = nlohmann::ordered_json::array();
  for (const SubsetReport& s : report.subsets) {
    nlohmann::ordered_json j;
    j["name"] = s.name;
    j["defined"] = s.defined;
    if (!s.defined) j["error"] = s.error;
    j["mr2"] = s.mr2;
    j["recall"] = s.recall;
    j["tp"] = s.tp;
    j["fp"] = s.fp;
    j["ignored"] = s.ignored;
    j["n_gt"] = s.n_gt;
    j["n_ignore_gt"] = s.n_ignore_gt;
    auto curve = nlohmann::ordered_json::array();
    for (const CurvePoint& p : s.curve) curve.push_back({p.score, p.fppi, p.miss_rate});
    j["curve"] = std::move(curve);
    doc["subsets"].push_back(std::move(j));
  }
  out << doc.dump(2) << '\n';
}

}  // namespace mhas

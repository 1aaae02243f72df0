#ifndef MHAS_EVALUATION_HPP_
#define MHAS_EVALUATION_HPP_

// Pedestrian benchmark scoring: per-subset greedy matching with ignore
// regions, FPPI / miss-rate curves and the log-average miss rate over a
// log-uniform set of FPPI reference points.

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mhas/core.hpp"
#include "mhas/data_io.hpp"

namespace mhas {

/// Ground-truth stratum. Both ranges are inclusive; height is the full-box
/// pixel height, visibility the visible/full area ratio.
struct SubsetSpec {
  std::string name;
  double min_height = 0.0;
  double max_height = std::numeric_limits<double>::infinity();
  double min_visibility = 0.0;
  double max_visibility = std::numeric_limits<double>::infinity();

  bool contains(const Annotation& ann) const;
};

/// Reasonable, Small, Heavy, All.
const std::vector<SubsetSpec>& builtin_subsets();
/// Throws ValidationError for an unknown name.
const SubsetSpec& subset_by_name(const std::string& name);
/// Parses a comma-separated list of subset names.
std::vector<SubsetSpec> parse_subsets(const std::string& names);

enum class DetLabel { tp, fp, ignored };
enum class GtLabel { matched, missed, ignore };

/// Labels in the caller's input order.
struct MatchResult {
  std::vector<DetLabel> det_labels;
  std::vector<double> det_scores;
  std::vector<long> det_match;  // matched ground-truth index, -1 otherwise
  std::vector<GtLabel> gt_labels;

  std::size_t count(DetLabel l) const;
  std::size_t count(GtLabel l) const;
};

struct MatchParams {
  double iou_threshold = 0.5;
  /// Intersection over detection area needed to absorb a detection into an
  /// ignored ground truth.
  double ignore_overlap = 0.5;
};

/// Greedy matching in descending score order (stable for ties). Ground truths
/// outside `subset` become ignore regions; several detections may fall into
/// the same ignore region.
MatchResult match_image(std::span<const Detection> dets, std::span<const Annotation> gts,
                        const SubsetSpec& subset, const MatchParams& params = {});

struct CurveParams {
  int n_refs = 9;
  double ref_min = 1e-2;
  double ref_max = 1.0;
  double floor = 1e-6;

  std::vector<double> reference_points() const;
};

struct CurvePoint {
  double score = 0.0;  // threshold: detections with score >= this are kept
  double fppi = 0.0;
  double miss_rate = 1.0;
};

struct MissRateSummary {
  double mr2 = 1.0;
  std::vector<CurvePoint> curve;      // one point per distinct score, descending
  std::vector<double> sampled_miss;   // miss rate at each reference point
  std::size_t n_gt = 0;
};

/// Throws ValidationError when no image holds a non-ignored ground truth or
/// n_images is zero.
MissRateSummary log_average_miss_rate(std::span<const MatchResult> per_image, std::size_t n_images,
                                      const CurveParams& params = {});

struct EvalParams {
  MatchParams match;
  CurveParams curve;
};

struct SubsetReport {
  std::string name;
  bool defined = false;  // false when the subset has no ground truth
  std::string error;
  double mr2 = 1.0;
  double recall = 0.0;  // using every detection
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t ignored = 0;
  std::size_t n_gt = 0;
  std::size_t n_ignore_gt = 0;
  std::vector<CurvePoint> curve;
};

struct EvalReport {
  std::vector<SubsetReport> subsets;

  /// Throws ValidationError for a subset that was not evaluated.
  const SubsetReport& at(const std::string& name) const;
};

/// Detections naming images absent from the dataset are a ValidationError.
EvalReport evaluate(const DetectionSet& dets, const Dataset& ds, std::span<const SubsetSpec> subsets,
                    const EvalParams& params = {});

/// Fixed-order human-readable table.
void print_report_table(std::ostream& out, const EvalReport& report);
/// Machine-readable JSON mirror of the report.
void write_report_json(std::ostream& out, const EvalReport& report);

}  // namespace mhas

#endif  // MHAS_EVALUATION_HPP_

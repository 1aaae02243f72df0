#ifndef MHAS_SYNTH_HPP_
#define MHAS_SYNTH_HPP_

// Synthetic flat-ground scenes seen by a pinhole camera.
//
// A pedestrian of world height H_w standing at depth z has its feet on row
//   v = v0 + f * H_c / z
// and pixel height
//   h = f * H_w / z = (H_w / H_c) * (v - v0),
// so the mean height is linear in the foot row and therefore in the level.
// Detections carry ground-truth labels: true positives plus false positives
// above the horizon and oversized false positives on valid rows.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mhas/core.hpp"
#include "mhas/data_io.hpp"

namespace mhas {

struct SceneConfig {
  int width = 640;
  int height = 480;
  double focal = 600.0;           // pixels
  double camera_height = 1.5;     // meters
  double horizon_row = 200.0;     // pixels
  double z_min = 5.0;             // meters
  double z_max = 40.0;            // meters
  double person_height_mean = 1.70;
  double person_height_sigma = 0.07;
  int n_images = 50;
  int n_pedestrians = 600;
  int n_sky = 50;
  int n_oversize = 50;
  double oversize_factor = 2.0;
  double sky_min_height = 25.0;   // pixels
  double sky_max_height = 100.0;  // pixels
  double box_noise = 0.0;         // sigma of detection jitter, pixels
  bool noisy_annotations = false; // also jitter the annotation boxes
  /// Share of pedestrians whose annotation gets a visible box covering only
  /// the top part of the full box, with visibility drawn from the range below.
  double occluded_fraction = 0.2;
  double occluded_visibility_min = 0.3;
  double occluded_visibility_max = 0.6;
  double tp_score_min = 0.5;
  double tp_score_max = 1.0;
  double fp_score_min = 0.5;
  double fp_score_max = 1.0;
  double aspect_ratio = 0.41;     // width / height
  int b_h = 4;
  /// Move each foot row to the centre of its level so that noiseless heights
  /// lie exactly on the per-level line.
  bool snap_to_levels = true;
  int max_retries = 1000;
  std::uint64_t seed = 1;

  /// Throws ValidationError for inconsistent parameters.
  void validate() const;
};

enum class SynthLabel { true_pos, fp_sky, fp_oversize };

const char* to_string(SynthLabel label);
SynthLabel parse_synth_label(const std::string& text);

struct LabeledDetection {
  std::string image_id;
  Detection detection;
  SynthLabel label = SynthLabel::true_pos;
};

struct Scene {
  Dataset dataset;
  std::vector<LabeledDetection> detections;  // grouped by image, dataset order
  double a = 0.0;  // true per-level slope of the mean height
  double b = 0.0;  // true intercept
};

Scene generate_scene(const SceneConfig& cfg);

/// Mean pixel height of a pedestrian whose feet are on `row`.
double line_height_at_row(const SceneConfig& cfg, double row);

DetectionSet to_detection_set(const std::vector<LabeledDetection>& dets);

void write_labels(std::ostream& out, const std::vector<LabeledDetection>& dets);
std::vector<LabeledDetection> parse_labels(std::istream& in, const std::string& source);
void write_truth(std::ostream& out, const SceneConfig& cfg, const Scene& scene);

}  // namespace mhas

#endif  // MHAS_SYNTH_HPP_

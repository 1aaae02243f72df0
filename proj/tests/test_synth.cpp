#include <cmath>
#include <sstream>

#include "doctest.h"
#include "mhas/synth.hpp"
#include "test_util.hpp"

using namespace mhas;

TEST_CASE("noiseless pedestrians lie on the perspective line") {
  SceneConfig cfg;
  cfg.person_height_sigma = 0.0;
  const Scene s = generate_scene(cfg);
  CHECK(s.dataset.annotation_count() == 600);
  for (const auto& anns : s.dataset.annotations)
    for (const Annotation& a : anns) {
      const double row = a.full.y + a.full.h;
      // Pinhole geometry directly: h = f * H_w / z with row = v0 + f * H_c / z.
      const double z = cfg.focal * cfg.camera_height / (row - cfg.horizon_row);
      CHECK(a.full.h == doctest::Approx(cfg.focal * cfg.person_height_mean / z).epsilon(1e-12));
      const long m = testing::level_by_counting(row, cfg.b_h);
      CHECK(a.full.h == doctest::Approx(s.a * m + s.b).epsilon(1e-12));
      CHECK(row > cfg.horizon_row);
      CHECK(row <= cfg.height);
    }
}

TEST_CASE("labels are truthful") {
  SceneConfig cfg;
  cfg.seed = 17;
  const Scene s = generate_scene(cfg);
  std::size_t tp = 0, sky = 0, over = 0;
  for (const LabeledDetection& d : s.detections) {
    const auto idx = s.dataset.index_of(d.image_id);
    REQUIRE(idx);
    const auto& anns = s.dataset.annotations[*idx];
    const BBox& b = d.detection.box;
    switch (d.label) {
      case SynthLabel::true_pos: {
        ++tp;
        bool exact = false;
        for (const Annotation& a : anns) exact = exact || a.full == b;
        CHECK(exact);
        break;
      }
      case SynthLabel::fp_sky:
        ++sky;
        CHECK(b.y + b.h < cfg.horizon_row);
        CHECK(b.y + b.h >= 0.25 * cfg.horizon_row);
        break;
      case SynthLabel::fp_oversize: {
        ++over;
        const double row = b.y + b.h;
        CHECK(b.h == doctest::Approx(cfg.oversize_factor * cfg.person_height_mean / cfg.camera_height *
                                     (row - cfg.horizon_row)));
        break;
      }
    }
    if (d.label != SynthLabel::true_pos)
      for (const Annotation& a : anns) CHECK(iou(a.full, b) < 0.3);
    CHECK(d.detection.score >= 0.5);
    CHECK(d.detection.score <= 1.0);
  }
  CHECK(tp == 600);
  CHECK(sky == 50);
  CHECK(over == 50);
}

TEST_CASE("same seed, same scene") {
  SceneConfig cfg;
  cfg.seed = 4;
  cfg.box_noise = 1.5;
  std::ostringstream a, b, c;
  write_labels(a, generate_scene(cfg).detections);
  write_labels(b, generate_scene(cfg).detections);
  cfg.seed = 5;
  write_labels(c, generate_scene(cfg).detections);
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
}

TEST_CASE("label file round trip") {
  SceneConfig cfg;
  cfg.n_images = 3;
  cfg.n_pedestrians = 9;
  cfg.n_sky = cfg.n_oversize = 2;
  const Scene s = generate_scene(cfg);
  std::ostringstream out;
  write_labels(out, s.detections);
  std::istringstream in(out.str());
  const auto back = parse_labels(in, "labels.jsonl");
  REQUIRE(back.size() == s.detections.size());
  std::ostringstream again;
  write_labels(again, back);
  CHECK(again.str() == out.str());
  CHECK_THROWS_AS(parse_synth_label("FP_OTHER"), ValidationError);
}

TEST_CASE("invalid configurations") {
  SceneConfig cfg;
  cfg.oversize_factor = 1.0;
  CHECK_THROWS_AS(generate_scene(cfg), ValidationError);
  cfg = SceneConfig{};
  cfg.horizon_row = 500.0;
  CHECK_THROWS_AS(generate_scene(cfg), ValidationError);
  cfg = SceneConfig{};
  cfg.z_min = 0.0;
  CHECK_THROWS_AS(generate_scene(cfg), ValidationError);
}

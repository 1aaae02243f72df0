#include "mhas/synth.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

#include "json.hpp"

namespace mhas {

void SceneConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ValidationError(std::string("scene config: ") + msg);
  };
  require(width > 0 && height > 0, "image size must be positive");
  require(focal > 0.0, "focal must be > 0");
  require(camera_height > 0.0, "camera_height must be > 0");
  require(z_min > 0.0 && z_max >= z_min, "depth range must satisfy 0 < z_min <= z_max");
  require(horizon_row >= 0.0 && horizon_row < height, "horizon_row must lie inside the image");
  require(person_height_mean > 0.0 && person_height_sigma >= 0.0, "person height must be positive");
  require(n_images > 0, "n_images must be positive");
  require(n_pedestrians >= 0 && n_sky >= 0 && n_oversize >= 0, "counts must be >= 0");
  require(oversize_factor > 1.0, "oversize_factor must be > 1");
  require(sky_min_height > 0.0 && sky_max_height >= sky_min_height, "sky height range invalid");
  require(box_noise >= 0.0, "box_noise must be >= 0");
  require(tp_score_min >= 0.0 && tp_score_max <= 1.0 && tp_score_min <= tp_score_max, "tp score range invalid");
  require(fp_score_min >= 0.0 && fp_score_max <= 1.0 && fp_score_min <= fp_score_max, "fp score range invalid");
  require(occluded_fraction >= 0.0 && occluded_fraction <= 1.0, "occluded_fraction must lie in [0, 1]");
  require(occluded_visibility_min > 0.0 && occluded_visibility_max <= 1.0 &&
              occluded_visibility_min <= occluded_visibility_max,
          "occluded visibility range invalid");
  require(aspect_ratio > 0.0, "aspect_ratio must be > 0");
  require(b_h > 0, "b_h must be positive");
  require(max_retries > 0, "max_retries must be positive");
}

const char* to_string(SynthLabel label) {
  switch (label) {
    case SynthLabel::true_pos: return "TRUE_POS";
    case SynthLabel::fp_sky: return "FP_SKY";
    case SynthLabel::fp_oversize: return "FP_OVERSIZE";
  }
  return "UNKNOWN";
}

SynthLabel parse_synth_label(const std::string& text) {
  if (text == "TRUE_POS") return SynthLabel::true_pos;
  if (text == "FP_SKY") return SynthLabel::fp_sky;
  if (text == "FP_OVERSIZE") return SynthLabel::fp_oversize;
  throw ValidationError("unknown synthetic label '" + text + "'");
}

double line_height_at_row(const SceneConfig& cfg, double row) {
  return cfg.person_height_mean / cfg.camera_height * (row - cfg.horizon_row);
}

namespace {

class Generator {
 public:
  explicit Generator(const SceneConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  double uniform(double lo, double hi) {
    if (lo == hi) return lo;
    return std::uniform_real_distribution<double>(lo, hi)(rng_);
  }
  double normal(double sigma) {
    if (sigma == 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng_);
  }

  double person_height() {
    for (int i = 0; i < cfg_.max_retries; ++i) {
      const double hw = cfg_.person_height_mean + normal(cfg_.person_height_sigma);
      if (hw > 0.0) return hw;
    }
    throw ValidationError("scene generation: cannot draw a positive person height");
  }

  // Foot row of a pedestrian at a random depth, snapped when configured.
  double foot_row() {
    const double z = uniform(cfg_.z_min, cfg_.z_max);
    double v = cfg_.horizon_row + cfg_.focal * cfg_.camera_height / z;
    if (cfg_.snap_to_levels) v = (std::ceil(v / cfg_.b_h) - 0.5) * cfg_.b_h;
    return v;
  }

  // Upright box of height h with feet on `row` at a random column, or
  // nullopt when it cannot be placed inside the image horizontally.
  std::optional<BBox> place(double row, double h) {
    const double w = cfg_.aspect_ratio * h;
    if (!(h > 0.0) || w > cfg_.width || row > cfg_.height || row <= 0.0) return std::nullopt;
    return BBox{uniform(0.0, cfg_.width - w), row - h, w, h};
  }

  std::optional<BBox> jitter(const BBox& b) {
    if (cfg_.box_noise == 0.0) return b;
    BBox j{b.x + normal(cfg_.box_noise), b.y + normal(cfg_.box_noise), b.w + normal(cfg_.box_noise),
           b.h + normal(cfg_.box_noise)};
    if (!j.valid()) return std::nullopt;
    return j;
  }

  [[noreturn]] void exhausted(const char* what) const {
    throw ValidationError(std::string("scene generation: retry cap reached while placing ") + what);
  }

 private:
  const SceneConfig& cfg_;
  std::mt19937_64 rng_;
};

bool overlaps_any(const BBox& box, const std::vector<Annotation>& anns, double limit) {
  for (const Annotation& a : anns)
    if (iou(box, a.full) >= limit) return true;
  return false;
}

// FP boxes are kept clear of every annotation so that their label stays
// truthful under matching.
constexpr double kFpClearance = 0.3;

}  // namespace

Scene generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Generator gen(cfg);
  const auto n_img = static_cast<std::size_t>(cfg.n_images);
  std::vector<std::vector<Annotation>> anns(n_img);
  std::vector<std::vector<LabeledDetection>> dets(n_img);
  std::vector<std::string> ids(n_img);
  for (std::size_t i = 0; i < n_img; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "synth_%04zu", i);
    ids[i] = buf;
  }

  for (int k = 0; k < cfg.n_pedestrians; ++k) {
    const std::size_t img = static_cast<std::size_t>(k) % n_img;
    int tries = 0;
    for (;; ++tries) {
      if (tries >= cfg.max_retries) gen.exhausted("a pedestrian");
      const double hw = gen.person_height();
      const double row = gen.foot_row();
      auto box = gen.place(row, hw / cfg.camera_height * (row - cfg.horizon_row));
      if (!box) continue;
      BBox annotated = *box;
      if (cfg.noisy_annotations) {
        auto noisy = gen.jitter(*box);
        if (!noisy) continue;
        annotated = *noisy;
      }
      auto detected = gen.jitter(*box);
      if (!detected) continue;
      std::optional<BBox> visible;
      if (cfg.occluded_fraction > 0.0 && gen.uniform(0.0, 1.0) < cfg.occluded_fraction) {
        const double v = gen.uniform(cfg.occluded_visibility_min, cfg.occluded_visibility_max);
        visible = BBox{annotated.x, annotated.y, annotated.w, v * annotated.h};
      }
      anns[img].push_back(Annotation{annotated, visible});
      dets[img].push_back({ids[img], {*detected, gen.uniform(cfg.tp_score_min, cfg.tp_score_max)},
                           SynthLabel::true_pos});
      break;
    }
  }

  auto add_fp = [&](std::size_t img, SynthLabel label) {
    for (int tries = 0; tries < cfg.max_retries; ++tries) {
      std::optional<BBox> box;
      if (label == SynthLabel::fp_sky) {
        const double row = gen.uniform(0.25 * cfg.horizon_row, cfg.horizon_row);
        if (!(row < cfg.horizon_row)) continue;
        box = gen.place(row, gen.uniform(cfg.sky_min_height, cfg.sky_max_height));
      } else {
        const double row = gen.foot_row();
        box = gen.place(row, cfg.oversize_factor * line_height_at_row(cfg, row));
      }
      if (!box || overlaps_any(*box, anns[img], kFpClearance)) continue;
      dets[img].push_back({ids[img], {*box, gen.uniform(cfg.fp_score_min, cfg.fp_score_max)}, label});
      return;
    }
    gen.exhausted(to_string(label));
  };
  for (int k = 0; k < cfg.n_sky; ++k) add_fp(static_cast<std::size_t>(k) % n_img, SynthLabel::fp_sky);
  for (int k = 0; k < cfg.n_oversize; ++k)
    add_fp(static_cast<std::size_t>(k) % n_img, SynthLabel::fp_oversize);

  Scene scene;
  for (std::size_t i = 0; i < n_img; ++i) {
    scene.dataset.add_image(ImageMeta{ids[i], cfg.width, cfg.height}, std::move(anns[i]));
    for (auto& d : dets[i]) scene.detections.push_back(std::move(d));
  }
  // Heights follow (H_w / H_c) * (row - v0). Snapped rows sit at the level
  // centre (m - 1/2) * b_h, which is also where unsnapped rows average out.
  const double k = cfg.person_height_mean / cfg.camera_height;
  scene.a = k * cfg.b_h;
  scene.b = -k * (cfg.horizon_row + 0.5 * cfg.b_h);
  return scene;
}

DetectionSet to_detection_set(const std::vector<LabeledDetection>& dets) {
  DetectionSet set;
  for (const auto& d : dets) set.add(d.image_id, d.detection);
  return set;
}

void write_labels(std::ostream& out, const std::vector<LabeledDetection>& dets) {
  for (const auto& d : dets) {
    const BBox& b = d.detection.box;
    out << "{\"image_id\":" << nlohmann::json(d.image_id).dump() << ",\"x\":" << format_real(b.x)
        << ",\"y\":" << format_real(b.y) << ",\"w\":" << format_real(b.w) << ",\"h\":" << format_real(b.h)
        << ",\"score\":" << format_real(d.detection.score) << ",\"label\":\"" << to_string(d.label)
        << "\"}\n";
  }
}

std::vector<LabeledDetection> parse_labels(std::istream& in, const std::string& source) {
  std::vector<LabeledDetection> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      LabeledDetection d;
      d.image_id = j.at("image_id").get<std::string>();
      d.detection.box = {j.at("x").get<double>(), j.at("y").get<double>(), j.at("w").get<double>(),
                         j.at("h").get<double>()};
      d.detection.score = j.at("score").get<double>();
      d.label = parse_synth_label(j.at("label").get<std::string>());
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(source + ":" + std::to_string(line) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(source + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

void write_truth(std::ostream& out, const SceneConfig& cfg, const Scene& scene) {
  out << "{\"a\":" << format_real(scene.a) << ",\"b\":" << format_real(scene.b) << ",\"b_h\":" << cfg.b_h
      << ",\"horizon_row\":" << format_real(cfg.horizon_row)
      << ",\"camera_height\":" << format_real(cfg.camera_height)
      << ",\"person_height_mean\":" << format_real(cfg.person_height_mean) << ",\"seed\":" << cfg.seed
      << "}\n";
}

}  // namespace mhas

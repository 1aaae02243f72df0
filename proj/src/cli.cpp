#include "mhas/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include "CLI11.hpp"
#include "mhas/data_io.hpp"
#include "mhas/evaluation.hpp"
#include "mhas/existence.hpp"
#include "mhas/mean_height.hpp"
#include "mhas/suppression.hpp"
#include "mhas/synth.hpp"
#include "mhas/tuning.hpp"

namespace mhas::cli {

namespace {

struct GlobalOptions {
  std::uint64_t seed = 1;
  int threads = 1;
  bool quiet = false;
};

// Inputs that determine the per-image mean height and existence profiles.
struct ProfileOptions {
  std::string mh_profile;
  std::string es_profile;
  std::string coeffs;
  std::string dataset;
  int b_h = 4;
};

struct SuppressOptions {
  ProfileOptions profiles;
  std::string detections;
  std::string out;
  SuppressionParams params;
};

struct EvalOptions {
  std::string dataset;
  std::string detections;
  std::string subsets = "Reasonable,Small,Heavy,All";
  double iou_threshold = 0.5;
  double ignore_threshold = 0.5;
  int refs = 9;
  double floor = 1e-6;
  std::string report_out;
};

struct TuneOptions {
  ProfileOptions profiles;
  std::string detections;
  std::string grid_alpha_h = "0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
  std::string grid_alpha_s = "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.10";
  std::string grid_r = "1,2,4,8,16";
  std::string subsets = "Reasonable,All";
  double recall_slack = 0.0;
  bool use_height = true;
  bool use_existence = true;
  std::string report_out;
  std::string best_out;
};

// ---------------------------------------------------------------------------
// Profile assembly

template <typename Profile, typename Convert>
std::map<std::string, Profile> per_image_or_shared(const std::vector<ProfileRecord>& recs,
                                                   std::optional<Profile>& shared, Convert convert) {
  std::map<std::string, Profile> out;
  for (const ProfileRecord& r : recs) {
    if (r.image_id)
      out.emplace(*r.image_id, convert(r));
    else
      shared = convert(r);
  }
  return out;
}

ProfileSource build_profile_source(const ProfileOptions& opt, const std::vector<std::string>& image_ids,
                                   bool need_height, bool need_existence) {
  if (!opt.mh_profile.empty() && !opt.coeffs.empty())
    throw ValidationError("give either --mh-profile or --coeffs, not both");
  if (need_height && opt.mh_profile.empty() && opt.coeffs.empty())
    throw ValidationError("the height condition needs --mh-profile or --coeffs");
  if (need_existence && opt.es_profile.empty())
    throw ValidationError("the existence condition needs --es-profile");

  std::optional<MeanHeightProfile> mh_shared;
  std::map<std::string, MeanHeightProfile> mh_images;
  if (!opt.mh_profile.empty())
    mh_images = per_image_or_shared<MeanHeightProfile>(load_profiles(opt.mh_profile), mh_shared,
                                                       mean_height_from_record);
  std::optional<ExistenceProfile> es_shared;
  std::map<std::string, ExistenceProfile> es_images;
  if (!opt.es_profile.empty())
    es_images = per_image_or_shared<ExistenceProfile>(load_profiles(opt.es_profile), es_shared,
                                                      existence_from_record);
  std::optional<CoefficientFile> coeffs;
  std::optional<Dataset> ds;
  if (!opt.coeffs.empty()) {
    coeffs = load_coefficients(opt.coeffs);
    if (!opt.dataset.empty()) ds = load_dataset(opt.dataset);
  }

  ProfileSource source;
  for (const std::string& id : image_ids) {
    ImageProfiles p;
    if (!opt.es_profile.empty()) {
      auto it = es_images.find(id);
      if (it != es_images.end())
        p.existence = it->second;
      else if (es_shared)
        p.existence = *es_shared;
      else
        throw ValidationError("no existence profile for image '" + id + "'");
    }
    if (!opt.mh_profile.empty()) {
      auto it = mh_images.find(id);
      if (it != mh_images.end())
        p.mean_height = it->second;
      else if (mh_shared)
        p.mean_height = *mh_shared;
      else
        throw ValidationError("no mean height profile for image '" + id + "'");
    } else if (coeffs) {
      LevelGrid grid;
      if (p.existence.grid.n_levels > 0) {
        grid = p.existence.grid;
        if (grid.b_h != opt.b_h)
          throw ValidationError("profile grid mismatch: --b-h=" + std::to_string(opt.b_h) +
                                ", existence profile has b_h=" + std::to_string(grid.b_h));
      } else if (ds) {
        auto idx = ds->index_of(id);
        if (!idx) throw ValidationError("image '" + id + "' not in --dataset");
        grid = LevelGrid::for_image_height(ds->images[*idx].height, opt.b_h);
      } else {
        throw ValidationError("--coeffs needs --es-profile or --dataset to size the level grid");
      }
      const auto [a, b] = coeffs->lookup(id);
      p.mean_height = realize_profile(a, b, grid);
    }
    source.set_image(id, std::move(p));
  }
  return source;
}

void add_profile_flags(CLI::App* cmd, ProfileOptions& opt) {
  cmd->add_option("--mh-profile", opt.mh_profile, "Mean height ProfileFile (shared or per-image)");
  cmd->add_option("--es-profile", opt.es_profile, "Existence ProfileFile (shared or per-image)");
  cmd->add_option("--coeffs", opt.coeffs, "CoefficientFile realized into mean height profiles");
  cmd->add_option("--dataset", opt.dataset, "DatasetFile (image heights for --coeffs)");
  cmd->add_option("--b-h", opt.b_h, "Pixels per level")->capture_default_str()->check(CLI::PositiveNumber);
}

std::vector<std::string> all_image_ids(const DetectionSet& dets, const Dataset* ds) {
  std::vector<std::string> ids = dets.image_ids();
  if (ds) {
    std::set<std::string> seen(ids.begin(), ids.end());
    for (const auto& img : ds->images)
      if (seen.insert(img.image_id).second) ids.push_back(img.image_id);
  }
  return ids;
}

void log(const GlobalOptions& g, std::ostream& out, const std::string& msg) {
  if (!g.quiet) out << msg << '\n';
}

// ---------------------------------------------------------------------------
// Subcommands

SceneConfig default_scene() { return SceneConfig{}; }

void add_scene_flags(CLI::App* cmd, SceneConfig& cfg) {
  cmd->add_option("--width", cfg.width)->capture_default_str();
  cmd->add_option("--height", cfg.height)->capture_default_str();
  cmd->add_option("--focal", cfg.focal)->capture_default_str();
  cmd->add_option("--camera-height", cfg.camera_height)->capture_default_str();
  cmd->add_option("--horizon-row", cfg.horizon_row)->capture_default_str();
  cmd->add_option("--z-min", cfg.z_min)->capture_default_str();
  cmd->add_option("--z-max", cfg.z_max)->capture_default_str();
  cmd->add_option("--person-height-mean", cfg.person_height_mean)->capture_default_str();
  cmd->add_option("--person-height-sigma", cfg.person_height_sigma)->capture_default_str();
  cmd->add_option("--n-images", cfg.n_images)->capture_default_str();
  cmd->add_option("--n-pedestrians", cfg.n_pedestrians)->capture_default_str();
  cmd->add_option("--n-sky", cfg.n_sky)->capture_default_str();
  cmd->add_option("--n-oversize", cfg.n_oversize)->capture_default_str();
  cmd->add_option("--oversize-factor", cfg.oversize_factor)->capture_default_str();
  cmd->add_option("--occluded-fraction", cfg.occluded_fraction)->capture_default_str();
  cmd->add_option("--box-noise", cfg.box_noise, "Sigma of detection box jitter (pixels)")->capture_default_str();
  cmd->add_flag("--noisy-annotations", cfg.noisy_annotations, "Jitter annotation boxes too");
  cmd->add_option("--b-h", cfg.b_h)->capture_default_str();
  cmd->add_flag("--snap-to-levels,!--no-snap-to-levels", cfg.snap_to_levels)->capture_default_str();
}

int cmd_synth(const GlobalOptions& g, SceneConfig cfg, const std::string& out_dataset,
              const std::string& out_detections, const std::string& out_labels,
              const std::string& out_truth, std::ostream& out) {
  cfg.seed = g.seed;
  const Scene scene = generate_scene(cfg);
  save_dataset(out_dataset, scene.dataset);
  save_detections(out_detections, to_detection_set(scene.detections));
  if (!out_labels.empty()) {
    auto f = open_output(out_labels);
    write_labels(f, scene.detections);
  }
  if (!out_truth.empty()) {
    auto f = open_output(out_truth);
    write_truth(f, cfg, scene);
  }
  log(g, out, "synth: " + std::to_string(scene.dataset.size()) + " images, " +
                  std::to_string(scene.dataset.annotation_count()) + " annotations, " +
                  std::to_string(scene.detections.size()) + " detections; a=" + format_real(scene.a) +
                  " b=" + format_real(scene.b));
  return kOk;
}

int cmd_suppress(const GlobalOptions& g, const SuppressOptions& opt, std::ostream& out) {
  opt.params.validate();
  const DetectionSet dets = load_detections(opt.detections);
  std::optional<Dataset> ds;
  if (!opt.profiles.dataset.empty()) ds = load_dataset(opt.profiles.dataset);
  const ProfileSource source = build_profile_source(
      opt.profiles, all_image_ids(dets, ds ? &*ds : nullptr), opt.params.use_height, opt.params.use_existence);
  const DetectionSet kept = suppress_all(dets, source, opt.params, g.threads);
  save_detections(opt.out, kept);
  log(g, out, "suppress: kept " + std::to_string(kept.total()) + " of " + std::to_string(dets.total()) +
                  " detections");
  return kOk;
}

EvalReport run_eval(const EvalOptions& opt, const Dataset& ds, const DetectionSet& dets) {
  EvalParams params;
  params.match.iou_threshold = opt.iou_threshold;
  params.match.ignore_overlap = opt.ignore_threshold;
  params.curve.n_refs = opt.refs;
  params.curve.floor = opt.floor;
  const auto subsets = parse_subsets(opt.subsets);
  return evaluate(dets, ds, subsets, params);
}

int cmd_eval(const EvalOptions& opt, std::ostream& out) {
  const Dataset ds = load_dataset(opt.dataset);
  const DetectionSet dets = load_detections(opt.detections, &ds);
  const EvalReport report = run_eval(opt, ds, dets);
  print_report_table(out, report);
  if (!opt.report_out.empty()) {
    auto f = open_output(opt.report_out);
    write_report_json(f, report);
  }
  return kOk;
}

GridSpec grid_from(const TuneOptions& opt) {
  GridSpec grid;
  grid.alpha_h_values = parse_real_list(opt.grid_alpha_h);
  grid.alpha_s_values = parse_real_list(opt.grid_alpha_s);
  grid.r_values = parse_int_list(opt.grid_r);
  for (const SubsetSpec& s : parse_subsets(opt.subsets)) grid.objective_subsets.push_back(s.name);
  grid.recall_slack = opt.recall_slack;
  grid.use_height = opt.use_height;
  grid.use_existence = opt.use_existence;
  return grid;
}

void write_best_params(std::ostream& out, const SuppressionParams& p) {
  out << "{\"alpha_h\":" << format_real(p.alpha_h) << ",\"alpha_s\":" << format_real(p.alpha_s)
      << ",\"r\":" << p.r << ",\"use_height\":" << (p.use_height ? "true" : "false")
      << ",\"use_existence\":" << (p.use_existence ? "true" : "false") << "}\n";
}

TuningResult run_tune(const GlobalOptions& g, const TuneOptions& opt) {
  if (opt.profiles.dataset.empty()) throw ValidationError("tune needs --dataset (pseudo-validation set)");
  const Dataset ds = load_dataset(opt.profiles.dataset);
  const DetectionSet dets = load_detections(opt.detections, &ds);
  const GridSpec grid = grid_from(opt);
  const ProfileSource source =
      build_profile_source(opt.profiles, all_image_ids(dets, &ds), opt.use_height, opt.use_existence);
  return tune_grid(dets, ds, source, grid, EvalParams{}, g.threads);
}

TuningResult tune_and_report(const GlobalOptions& g, const TuneOptions& opt, std::ostream& out) {
  TuningResult result = run_tune(g, opt);
  if (!opt.report_out.empty()) {
    auto f = open_output(opt.report_out);
    write_tuning_json(f, result);
  }
  if (!opt.best_out.empty()) {
    auto f = open_output(opt.best_out);
    write_best_params(f, result.best().params);
  }
  const SuppressionParams& p = result.best().params;
  out << "best alpha_h=" << format_real(p.alpha_h) << " alpha_s=" << format_real(p.alpha_s) << " r=" << p.r
      << " recall=" << format_real(result.best().recall) << " objective=" << format_real(result.best().objective)
      << " configs=" << result.table.size() << '\n';
  return result;
}

int cmd_tune(const GlobalOptions& g, const TuneOptions& opt, std::ostream& out) {
  tune_and_report(g, opt, out);
  return kOk;
}

// Synthetic end-to-end run that checks the filter's effect on labeled FPs.
int cmd_pipeline(const GlobalOptions& g, SceneConfig cfg, const std::string& work_dir,
                 const TuneOptions& tune_template, std::ostream& out) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(work_dir, ec);
  if (ec) throw IoError(work_dir + ": cannot create directory: " + ec.message());
  auto path = [&](const char* name) { return (fs::path(work_dir) / name).string(); };

  cfg.seed = g.seed;
  const Scene scene = generate_scene(cfg);
  save_dataset(path("dataset.jsonl"), scene.dataset);
  const DetectionSet raw = to_detection_set(scene.detections);
  save_detections(path("detections.jsonl"), raw);
  {
    auto f = open_output(path("labels.jsonl"));
    write_labels(f, scene.detections);
    auto t = open_output(path("truth.jsonl"));
    write_truth(t, cfg, scene);
  }

  const LevelGrid grid = LevelGrid::for_image_height(cfg.height, cfg.b_h);
  save_profiles(path("mh_profile.jsonl"), {to_record(build_manual_profile(scene.dataset, grid))});
  save_profiles(path("es_profile.jsonl"), {to_record(build_statistical_profile(scene.dataset, grid))});

  TuneOptions topt = tune_template;
  topt.profiles.dataset = path("dataset.jsonl");
  topt.profiles.mh_profile = path("mh_profile.jsonl");
  topt.profiles.es_profile = path("es_profile.jsonl");
  topt.profiles.b_h = cfg.b_h;
  topt.detections = path("detections.jsonl");
  topt.report_out = path("tune_report.json");
  topt.best_out = path("best_params.json");
  const TuningResult tuned = tune_and_report(g, topt, out);

  SuppressOptions sopt;
  sopt.profiles = topt.profiles;
  sopt.detections = topt.detections;
  sopt.out = path("filtered.jsonl");
  sopt.params = tuned.best().params;
  cmd_suppress(g, sopt, out);

  // Reload from disk so the check covers the written files.
  const Dataset ds = load_dataset(path("dataset.jsonl"));
  const DetectionSet before = load_detections(path("detections.jsonl"), &ds);
  const DetectionSet after = load_detections(path("filtered.jsonl"), &ds);
  EvalOptions eopt;
  eopt.subsets = topt.subsets;
  const EvalReport rep_before = run_eval(eopt, ds, before);
  const EvalReport rep_after = run_eval(eopt, ds, after);
  {
    auto f = open_output(path("eval_before.json"));
    write_report_json(f, rep_before);
    auto h = open_output(path("eval_after.json"));
    write_report_json(h, rep_after);
  }

  // Labels are recovered from the written label file by (image, box, score).
  std::ifstream lf = open_input(path("labels.jsonl"));
  const auto labeled = parse_labels(lf, path("labels.jsonl"));
  using Key = std::tuple<std::string, double, double, double, double, double>;
  std::map<Key, int> remaining;
  for (const auto& id : after.image_ids())
    for (const Detection& d : after.for_image(id))
      ++remaining[Key{id, d.box.x, d.box.y, d.box.w, d.box.h, d.score}];
  std::size_t tp_total = 0, tp_kept = 0, fp_total = 0, fp_kept = 0;
  for (const auto& l : labeled) {
    const BBox& b = l.detection.box;
    auto it = remaining.find(Key{l.image_id, b.x, b.y, b.w, b.h, l.detection.score});
    const bool kept = it != remaining.end() && it->second > 0;
    if (kept) --it->second;
    if (l.label == SynthLabel::true_pos) {
      ++tp_total;
      tp_kept += kept;
    } else {
      ++fp_total;
      fp_kept += kept;
    }
  }

  bool ok = tp_kept == tp_total && fp_kept == 0;
  out << "pipeline: TP retained " << tp_kept << "/" << tp_total << ", FP removed " << (fp_total - fp_kept) << "/"
      << fp_total << '\n';
  for (const SubsetReport& s : rep_before.subsets) {
    const SubsetReport& a = rep_after.at(s.name);
    const bool better = s.defined && a.defined && a.mr2 < s.mr2;
    const bool same_recall = a.recall == s.recall;
    ok = ok && better && same_recall;
    out << "pipeline: " << s.name << " MR-2 " << format_real(100.0 * s.mr2) << "% -> "
        << format_real(100.0 * a.mr2) << "%, recall " << format_real(s.recall) << " -> "
        << format_real(a.recall) << (better && same_recall ? "" : "  [FAIL]") << '\n';
  }
  out << (ok ? "pipeline: PASS" : "pipeline: FAIL") << '\n';
  return ok ? kOk : kValidation;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-height aided suppression toolkit for pedestrian detection", "mhas"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for per-image and grid stages")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  std::function<int()> action;

  // synth
  SceneConfig scene_cfg = default_scene();
  std::string s_dataset, s_dets, s_labels, s_truth;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic perspective scene");
  add_scene_flags(synth, scene_cfg);
  synth->add_option("--out-dataset", s_dataset)->required();
  synth->add_option("--out-detections", s_dets)->required();
  synth->add_option("--out-labels", s_labels);
  synth->add_option("--out-truth", s_truth);
  synth->callback([&] { action = [&] { return cmd_synth(g, scene_cfg, s_dataset, s_dets, s_labels, s_truth, out); }; });

  // split
  std::string sp_dataset, sp_out;
  std::size_t sp_count = 0;
  auto* split = app.add_subcommand("split", "Seeded random subset of images (pseudo-validation set)");
  split->add_option("--dataset", sp_dataset)->required();
  split->add_option("--count", sp_count)->required();
  split->add_option("--out", sp_out)->required();
  split->callback([&] {
    action = [&] {
      save_dataset(sp_out, pseudo_validation_split(load_dataset(sp_dataset), sp_count, g.seed));
      return int{kOk};
    };
  });

  // coco-convert
  std::string cc_in, cc_out, cc_dataset;
  auto* coco = app.add_subcommand("coco-convert", "Convert COCO-style results to a DetectionFile");
  coco->add_option("--input", cc_in)->required();
  coco->add_option("--out", cc_out)->required();
  coco->add_option("--dataset", cc_dataset, "Reject results naming images absent from this DatasetFile");
  coco->callback([&] {
    action = [&] {
      const DetectionSet dets = import_coco_results(cc_in);
      if (!cc_dataset.empty()) {
        const Dataset ds = load_dataset(cc_dataset);
        for (const auto& id : dets.image_ids())
          if (!ds.index_of(id)) throw ValidationError(cc_in + ": unknown image_id '" + id + "'");
      }
      save_detections(cc_out, dets);
      return int{kOk};
    };
  });

  // mh-manual
  std::string mm_dataset, mm_out, mm_fill = "linear";
  int mm_bh = 4;
  auto* mh_manual = app.add_subcommand("mh-manual", "Per-level mean height averaged over a training set");
  mh_manual->add_option("--dataset", mm_dataset)->required();
  mh_manual->add_option("--b-h", mm_bh)->capture_default_str()->check(CLI::PositiveNumber);
  mh_manual->add_option("--fill-policy", mm_fill)->capture_default_str();
  mh_manual->add_option("--out", mm_out)->required();
  mh_manual->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(mm_dataset);
      if (ds.empty()) throw ValidationError(mm_dataset + ": dataset is empty");
      const LevelGrid grid = LevelGrid::for_image_height(ds.images.front().height, mm_bh);
      save_profiles(mm_out, {to_record(build_manual_profile(ds, grid, parse_fill_policy(mm_fill)))});
      return int{kOk};
    };
  });

  // mh-fit
  std::string mf_dataset, mf_out, mf_mode = "per-image";
  int mf_bh = 4;
  QualificationRules rules;
  auto* mh_fit = app.add_subcommand("mh-fit", "Fit perspective coefficients (a, b) by least squares");
  mh_fit->add_option("--dataset", mf_dataset)->required();
  mh_fit->add_option("--b-h", mf_bh)->capture_default_str()->check(CLI::PositiveNumber);
  mh_fit->add_option("--min-slope", rules.min_slope)->capture_default_str();
  mh_fit->add_option("--max-rel-err", rules.max_mean_rel_err)->capture_default_str();
  mh_fit->add_option("--min-samples", rules.min_samples)->capture_default_str();
  mh_fit->add_option("--min-levels", rules.min_distinct_levels)->capture_default_str();
  mh_fit->add_option("--mode", mf_mode, "per-image or global")
      ->capture_default_str()
      ->check(CLI::IsMember({"per-image", "global"}));
  mh_fit->add_option("--out", mf_out)->required();
  mh_fit->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(mf_dataset);
      CoefficientFile file;
      if (mf_mode == "global") {
        if (ds.empty()) throw ValidationError(mf_dataset + ": dataset is empty");
        const auto c = fit_global_coefficients(ds, LevelGrid{mf_bh, 0});
        file.global = std::make_pair(c.a, c.b);
        log(g, out, "global a=" + format_real(c.a) + " b=" + format_real(c.b) +
                        " mean_rel_err=" + format_real(c.mean_relative_error) +
                        " n=" + std::to_string(c.n_samples));
      } else {
        for (std::size_t i = 0; i < ds.size(); ++i) {
          const ImageFit fit = fit_image_coefficients(ds.annotations[i], LevelGrid{mf_bh, 0}, rules);
          log(g, out, ds.images[i].image_id + " " + to_string(fit.rejected) + " a=" + format_real(fit.coeffs.a) +
                          " b=" + format_real(fit.coeffs.b) +
                          " mean_rel_err=" + format_real(fit.coeffs.mean_relative_error));
          if (fit.accepted()) file.per_image.push_back({ds.images[i].image_id, fit.coeffs.a, fit.coeffs.b});
        }
        if (file.per_image.empty()) throw ValidationError("mh-fit: no image passed the qualification rules");
      }
      save_coefficients(mf_out, file);
      return int{kOk};
    };
  });

  // es-build
  std::string eb_dataset, eb_out;
  int eb_bh = 4;
  KernelParams kernel;
  auto* es_build = app.add_subcommand("es-build", "Statistical existence profile from annotations");
  es_build->add_option("--dataset", eb_dataset)->required();
  es_build->add_option("--b-h", eb_bh)->capture_default_str()->check(CLI::PositiveNumber);
  es_build->add_option("--c-sigma", kernel.c_sigma)->capture_default_str();
  es_build->add_option("--sigma-floor", kernel.sigma_floor)->capture_default_str();
  es_build->add_option("--out", eb_out)->required();
  es_build->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(eb_dataset);
      if (ds.empty()) throw ValidationError(eb_dataset + ": dataset is empty");
      const int h = ds.images.front().height;
      for (const auto& img : ds.images)
        if (img.height != h)
          throw ValidationError("es-build: image '" + img.image_id + "' has height " + std::to_string(img.height) +
                                ", expected " + std::to_string(h));
      const LevelGrid grid = LevelGrid::for_image_height(h, eb_bh);
      save_profiles(eb_out, {to_record(build_statistical_profile(ds, grid, kernel))});
      return int{kOk};
    };
  });

  // es-loss
  std::string el_dataset, el_pred;
  LossParams loss_params;
  KernelParams loss_kernel;
  auto* es_loss = app.add_subcommand("es-loss", "Score per-image existence predictions against annotations");
  es_loss->add_option("--dataset", el_dataset)->required();
  es_loss->add_option("--predictions", el_pred, "Per-image existence ProfileFile, values in (0, 1)")->required();
  es_loss->add_option("--c-sigma", loss_kernel.c_sigma)->capture_default_str();
  es_loss->add_option("--sigma-floor", loss_kernel.sigma_floor)->capture_default_str();
  es_loss->add_option("--beta", loss_params.beta)->capture_default_str();
  es_loss->add_option("--gamma", loss_params.gamma)->capture_default_str();
  es_loss->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(el_dataset);
      double total = 0.0;
      std::size_t n = 0;
      for (const ProfileRecord& rec : load_profiles(el_pred)) {
        if (!rec.image_id) throw ValidationError(el_pred + ": es-loss needs per-image predictions");
        if (rec.kind != ProfileKind::existence) throw ValidationError(el_pred + ": expected kind existence");
        const auto idx = ds.index_of(*rec.image_id);
        if (!idx) throw ValidationError(el_pred + ": unknown image_id '" + *rec.image_id + "'");
        const GtExistenceVector gt = build_gt_vector(ds.annotations[*idx], rec.grid);
        const double loss =
            existence_loss(rec.values, gt, build_gaussian_mask(gt, loss_kernel), loss_params);
        out << *rec.image_id << ' ' << format_real(loss) << '\n';
        total += loss;
        ++n;
      }
      out << "mean " << format_real(n ? total / static_cast<double>(n) : 0.0) << '\n';
      return int{kOk};
    };
  });

  // nms
  std::string nms_in, nms_out;
  double nms_thr = 0.5;
  auto* nms_cmd = app.add_subcommand("nms", "Greedy non-maximum suppression per image");
  nms_cmd->add_option("--detections", nms_in)->required();
  nms_cmd->add_option("--out", nms_out)->required();
  nms_cmd->add_option("--iou-threshold", nms_thr)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  nms_cmd->callback([&] {
    action = [&] {
      const DetectionSet dets = load_detections(nms_in);
      DetectionSet kept;
      for (const auto& id : dets.image_ids()) kept.set(id, nms(dets.for_image(id), nms_thr));
      save_detections(nms_out, kept);
      return int{kOk};
    };
  });

  // suppress
  SuppressOptions sup;
  auto* suppress = app.add_subcommand("suppress", "Mean height aided suppression of detections");
  suppress->add_option("--detections", sup.detections)->required();
  suppress->add_option("--out", sup.out)->required();
  suppress->add_option("--alpha-h", sup.params.alpha_h, "Relative height tolerance")->capture_default_str();
  suppress->add_option("--alpha-s", sup.params.alpha_s, "Existence score threshold")->capture_default_str();
  suppress->add_option("--r", sup.params.r, "Level search radius")->capture_default_str();
  suppress->add_flag("--use-height,!--no-use-height", sup.params.use_height)->capture_default_str();
  suppress->add_flag("--use-existence,!--no-use-existence", sup.params.use_existence)->capture_default_str();
  add_profile_flags(suppress, sup.profiles);
  suppress->callback([&] { action = [&] { return cmd_suppress(g, sup, out); }; });

  // eval
  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Log-average miss rate per subset");
  eval->add_option("--dataset", ev.dataset)->required();
  eval->add_option("--detections", ev.detections)->required();
  eval->add_option("--subsets", ev.subsets)->capture_default_str();
  eval->add_option("--iou-threshold", ev.iou_threshold)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  eval->add_option("--ignore-threshold", ev.ignore_threshold)->capture_default_str()->check(CLI::Range(0.0, 1.0));
  eval->add_option("--refs", ev.refs, "Number of FPPI reference points")->capture_default_str();
  eval->add_option("--floor", ev.floor, "Miss-rate floor")->capture_default_str();
  eval->add_option("--report-out", ev.report_out, "JSON report path");
  eval->callback([&] { action = [&] { return cmd_eval(ev, out); }; });

  // tune
  TuneOptions tn;
  auto add_tune_flags = [](CLI::App* cmd, TuneOptions& t) {
    cmd->add_option("--grid-alpha-h", t.grid_alpha_h)->capture_default_str();
    cmd->add_option("--grid-alpha-s", t.grid_alpha_s)->capture_default_str();
    cmd->add_option("--grid-r", t.grid_r)->capture_default_str();
    cmd->add_option("--subsets", t.subsets, "Objective subsets")->capture_default_str();
    cmd->add_option("--recall-slack", t.recall_slack)->capture_default_str();
    cmd->add_flag("--use-height,!--no-use-height", t.use_height)->capture_default_str();
    cmd->add_flag("--use-existence,!--no-use-existence", t.use_existence)->capture_default_str();
  };
  auto* tune = app.add_subcommand("tune", "Grid search of (alpha_h, alpha_s, r) on a pseudo-validation set");
  tune->add_option("--detections", tn.detections)->required();
  add_tune_flags(tune, tn);
  add_profile_flags(tune, tn.profiles);
  tune->add_option("--report-out", tn.report_out, "JSON report with every configuration");
  tune->add_option("--best-out", tn.best_out, "JSON file with the selected parameters");
  tune->callback([&] { action = [&] { return cmd_tune(g, tn, out); }; });

  // pipeline
  SceneConfig pipe_cfg = default_scene();
  TuneOptions pipe_tune;
  std::string work_dir;
  auto* pipeline = app.add_subcommand("pipeline", "synth -> mh-manual -> es-build -> tune -> suppress -> eval");
  pipeline->add_option("--work-dir", work_dir)->required();
  add_scene_flags(pipeline, pipe_cfg);
  add_tune_flags(pipeline, pipe_tune);
  pipeline->callback([&] { action = [&] { return cmd_pipeline(g, pipe_cfg, work_dir, pipe_tune, out); }; });

  std::vector<const char*> cargv;
  cargv.reserve(argv.size());
  for (const auto& a : argv) cargv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "mhas: error: usage: " << one_line(e.what()) << '\n';
    err << app.help();
    return kValidation;
  }

  try {
    return action ? action() : int{kValidation};
  } catch (const ValidationError& e) {
    err << "mhas: error: validation: " << one_line(e.what()) << '\n';
    return kValidation;
  } catch (const IoError& e) {
    err << "mhas: error: io: " << one_line(e.what()) << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "mhas: error: validation: " << one_line(e.what()) << '\n';
    return kValidation;
  }
}

}  // namespace mhas::cli

#include <algorithm>
#include <random>

#include "doctest.h"
#include "mhas/mean_height.hpp"
#include "mhas/synth.hpp"
#include "test_util.hpp"

using namespace mhas;
using testing::ann;

namespace {

// Annotation of height h whose foot lands in the middle of level m (b_h = 4).
Annotation at_level(long m, double h) {
  const double bottom = 4.0 * static_cast<double>(m) - 2.0;
  return ann(10.0, bottom - h, 0.41 * h, h);
}

const LevelGrid kGrid = LevelGrid::for_image_height(480, 4);

}  // namespace

TEST_CASE("single annotation populates its level") {
  const Dataset ds = testing::one_image({at_level(5, 40.0)});
  const MeanHeightProfile p = build_manual_profile(ds, kGrid, FillPolicy::none);
  REQUIRE(p.values.size() == 120);
  CHECK(p.at(5) == 40.0);
  CHECK(p.support[4] == 1);
  CHECK(std::count(p.support.begin(), p.support.end(), 0u) == 119);
}

TEST_CASE("same level heights are averaged") {
  const Dataset ds = testing::one_image({at_level(7, 30.0), at_level(7, 50.0)});
  CHECK(build_manual_profile(ds, kGrid).at(7) == 40.0);
}

TEST_CASE("linear fill zeroes above the topmost level and interpolates below") {
  const Dataset ds = testing::one_image({at_level(10, 20.0), at_level(14, 28.0), at_level(16, 30.0)});
  const MeanHeightProfile p = build_manual_profile(ds, kGrid, FillPolicy::linear);
  for (long m = 1; m < 10; ++m) CHECK(p.at(m) == 0.0);
  CHECK(p.at(10) == 20.0);
  CHECK(p.at(12) == doctest::Approx(24.0).epsilon(1e-15));
  CHECK(p.at(15) == doctest::Approx(29.0).epsilon(1e-15));
  CHECK(p.at(16) == 30.0);
  CHECK(p.at(20) == doctest::Approx(34.0).epsilon(1e-15));
  CHECK(p.at(120) == doctest::Approx(30.0 + 104.0).epsilon(1e-15));

  const MeanHeightProfile raw = build_manual_profile(ds, kGrid, FillPolicy::none);
  CHECK(raw.at(12) == 0.0);
  CHECK(raw.at(20) == 0.0);
}

TEST_CASE("downward extrapolation is clamped at zero") {
  const Dataset ds = testing::one_image({at_level(10, 40.0), at_level(12, 30.0)});
  const MeanHeightProfile p = build_manual_profile(ds, kGrid);
  CHECK(p.at(14) == doctest::Approx(20.0));
  CHECK(p.at(18) == 0.0);
  CHECK(p.at(100) == 0.0);
}

TEST_CASE("manual profile error paths") {
  CHECK_THROWS_AS(build_manual_profile(Dataset{}, kGrid), ValidationError);
  Dataset mixed;
  mixed.add_image({"a", 640, 480}, {at_level(5, 10.0)});
  mixed.add_image({"odd", 640, 360}, {});
  try {
    build_manual_profile(mixed, kGrid);
    FAIL("expected an error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("'odd'") != std::string::npos);
  }
  CHECK_THROWS_AS(build_manual_profile(testing::one_image({at_level(5, 10.0)}), LevelGrid{4, 50}),
                  ValidationError);
  CHECK_THROWS_AS(parse_fill_policy("cubic"), ValidationError);
}

TEST_CASE("manual profile equals the group-by-mean oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Dataset ds;
    std::uniform_int_distribution<int> count(1, 40);
    for (int i = 0; i < 5; ++i) {
      std::vector<Annotation> anns;
      const int n = count(rng);
      for (int k = 0; k < n; ++k) anns.push_back(Annotation{testing::random_box(rng, 500.0, 150.0), std::nullopt});
      ds.add_image({"i" + std::to_string(i), 640, 480}, std::move(anns));
    }
    const auto oracle = testing::group_by_mean(ds, 4, 120);
    if (oracle.empty()) continue;
    const MeanHeightProfile p = build_manual_profile(ds, kGrid, FillPolicy::none);
    for (long m = 1; m <= 120; ++m) {
      const auto it = oracle.find(m);
      CHECK(p.at(m) == (it == oracle.end() ? 0.0 : it->second));
    }
  }
}

TEST_CASE("exact line is recovered and accepted") {
  std::vector<Annotation> anns;
  for (long m : {10, 20, 30}) anns.push_back(at_level(m, 2.0 * m + 10.0));
  const ImageFit fit = fit_image_coefficients(anns, kGrid);
  CHECK(fit.accepted());
  CHECK(fit.coeffs.a == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fit.coeffs.b == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(fit.coeffs.mean_relative_error < 1e-12);
  CHECK(fit.coeffs.n_samples == 3);
  CHECK(fit.coeffs.n_distinct_levels == 3);
}

TEST_CASE("rejection rules fire in order") {
  CHECK(fit_image_coefficients(std::vector<Annotation>{at_level(4, 10.0), at_level(4, 12.0)}, kGrid).rejected ==
        RejectionRule::too_few_samples);
  CHECK(fit_image_coefficients(std::vector<Annotation>{at_level(4, 10.0), at_level(5, 12.0), at_level(5, 13.0),
                                                       at_level(4, 11.0)},
                               kGrid)
            .rejected == RejectionRule::too_few_samples);
  std::vector<Annotation> flat;
  for (long m : {10, 20, 30}) flat.push_back(at_level(m, 0.05 * m + 20.0));
  CHECK(fit_image_coefficients(flat, kGrid).rejected == RejectionRule::slope_too_small);
  std::vector<Annotation> scattered{at_level(10, 5.0), at_level(20, 100.0), at_level(30, 20.0),
                                    at_level(40, 150.0)};
  const ImageFit bad = fit_image_coefficients(scattered, kGrid);
  CHECK(bad.coeffs.a >= 0.1);
  CHECK(bad.coeffs.mean_relative_error > 0.4);
  CHECK(bad.rejected == RejectionRule::error_too_large);

  QualificationRules loose;
  loose.max_mean_rel_err = 10.0;
  CHECK(fit_image_coefficients(scattered, kGrid, loose).accepted());
}

TEST_CASE("fit matches the normal equations and ignores sample order") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<long> lvl(1, 120);
  std::uniform_real_distribution<double> noise(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Annotation> anns;
    std::vector<double> xs, ys;
    for (int k = 0; k < 30; ++k) {
      const long m = lvl(rng);
      const double h = 1.1 * m + 3.0 + noise(rng) + 10.0;
      anns.push_back(at_level(m, h));
      xs.push_back(static_cast<double>(m));
      ys.push_back(h);
    }
    const auto [oa, ob] = testing::normal_equations_fit(xs, ys);
    const ImageFit fit = fit_image_coefficients(anns, kGrid);
    CHECK(fit.coeffs.a == doctest::Approx(oa).epsilon(1e-9));
    CHECK(fit.coeffs.b == doctest::Approx(ob).epsilon(1e-9));

    std::shuffle(anns.begin(), anns.end(), rng);
    const ImageFit again = fit_image_coefficients(anns, kGrid);
    CHECK(again.coeffs.a == fit.coeffs.a);
    CHECK(again.coeffs.b == fit.coeffs.b);
    CHECK(again.coeffs.mean_relative_error == fit.coeffs.mean_relative_error);
  }
}

TEST_CASE("global fit pools images and rejects degenerate input") {
  Dataset ds;
  ds.add_image({"a", 640, 480}, {at_level(10, 25.0), at_level(20, 45.0)});
  ds.add_image({"b", 640, 480}, {at_level(30, 65.0)});
  const PerspectiveCoefficients c = fit_global_coefficients(ds, kGrid);
  CHECK(c.a == doctest::Approx(2.0));
  CHECK(c.b == doctest::Approx(5.0));
  CHECK(c.mean_relative_error < 1e-12);

  Dataset one_level;
  one_level.add_image({"a", 640, 480}, {at_level(10, 25.0), at_level(10, 45.0), at_level(10, 30.0)});
  CHECK_THROWS_AS(fit_global_coefficients(one_level, kGrid), ValidationError);
}

TEST_CASE("noiseless synthetic scenes recover the generator line") {
  SceneConfig cfg;
  cfg.person_height_sigma = 0.0;
  cfg.n_sky = cfg.n_oversize = 0;
  const Scene scene = generate_scene(cfg);
  const PerspectiveCoefficients c = fit_global_coefficients(scene.dataset, kGrid);
  CHECK(std::abs(c.a - scene.a) / std::abs(scene.a) <= 1e-9);
  CHECK(std::abs(c.b - scene.b) / std::abs(scene.b) <= 1e-9);
}

TEST_CASE("coefficient transform examples") {
  CHECK(transform_coefficients(0.7, -3.0, AugmentTransform{12.0, 12.0, 50.0, 50.0}) ==
        std::make_pair(0.7, -3.0));
  const auto [a, b] = transform_coefficients(0.5, 10.0, AugmentTransform{50.0, 0.0, 200.0, 100.0});
  CHECK(a == 0.5);
  CHECK(b == 45.0);
  const auto shifted = transform_coefficients(1.5, 20.0, AugmentTransform{0.0, 8.0, 64.0, 64.0});
  CHECK(shifted.second == 20.0 - 8.0 * 1.5);
  CHECK_THROWS_AS(transform_coefficients(1.0, 1.0, AugmentTransform{0.0, 0.0, 0.0, 1.0}), ValidationError);
}

TEST_CASE("transform followed by its inverse is the identity") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> coef(-5.0, 5.0), off(0.0, 400.0), size(20.0, 800.0);
  for (int i = 0; i < 10000; ++i) {
    const double a_o = coef(rng), b_o = 20.0 * coef(rng);
    const AugmentTransform t{off(rng), off(rng), size(rng), size(rng)};
    const auto [a1, b1] = transform_coefficients(a_o, b_o, t);
    const auto [a2, b2] = transform_coefficients(a1, b1, t.inverse());
    CHECK(a2 == a_o);
    CHECK(std::abs(b2 - b_o) <= 1e-12 * std::max(1.0, std::abs(b_o) + std::abs(a_o) * 400.0));
  }
}

TEST_CASE("realized profiles") {
  const LevelGrid g{4, 5};
  CHECK(realize_profile(2.0, 0.0, g).values == std::vector<double>{2, 4, 6, 8, 10});
  CHECK(realize_profile(2.0, -6.0, g).values == std::vector<double>{0, 0, 0, 2, 4});
  CHECK(realize_profile(0.0, 50.0, g).values == std::vector<double>(5, 50.0));
  CHECK(realize_profile(2.0, 0.0, g).support == std::vector<std::size_t>(5, 0));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(0.0, 3.0), b(-200.0, 50.0);
  for (int i = 0; i < 1000; ++i) {
    const auto v = realize_profile(a(rng), b(rng), kGrid).values;
    CHECK(std::all_of(v.begin(), v.end(), [](double x) { return x >= 0.0; }));
    CHECK(std::is_sorted(v.begin(), v.end()));
  }
}

TEST_CASE("profile record round trip") {
  const MeanHeightProfile p = realize_profile(2.0, -6.0, LevelGrid{4, 5});
  const ProfileRecord rec = to_record(p);
  CHECK(rec.kind == ProfileKind::mean_height);
  CHECK(mean_height_from_record(rec).values == p.values);
  ProfileRecord wrong = rec;
  wrong.kind = ProfileKind::existence;
  CHECK_THROWS_AS(mean_height_from_record(wrong), ValidationError);
}

#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "shiftbench/cueint.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"

using namespace shiftbench;
using namespace shiftbench::cue;

namespace {

FeatureSet as_features(const Dataset& d, std::string cue) {
  FeatureSet f;
  f.x = d.x;
  f.cue = std::move(cue);
  f.ids = d.ids;
  f.labels = d.y;
  return f;
}

double accuracy(const CueIntegrationModel& m, const Tensor& x, const std::vector<int>& y) {
  const auto p = svm_predict(m, x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += p.labels[i] == y[i] ? 1 : 0;
  return double(hit) / double(y.size());
}

}  // namespace

TEST_CASE("binary objective and subgradient") {
  const Tensor x = Tensor::from_rows({{2.0}, {-1.0}, {0.5}});
  const std::vector<int> s{1, -1, 1};
  const std::vector<double> w{1.0};
  // margins 2, 1, 0.5: only the last is active
  CHECK(svm_binary_objective(w, 0.0, x, s, 2.0) == doctest::Approx(1.0 / 4.0 + 0.5 / 3.0));
  const auto g = svm_binary_subgradient(w, 0.0, x, s, 2.0);
  CHECK(g.w[0] == doctest::Approx(0.5 - 0.5 / 3.0));
  CHECK(g.b == doctest::Approx(-1.0 / 3.0));
  for (std::uint64_t k = 0; k < 5; ++k) CHECK(gradcheck::loss_check("hinge", k) < 1e-6);
}

TEST_CASE("SVM objective reaches the grid minimum") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto l = oracle::noisy_line(seed, 200);
    for (double c : {0.5, 4.0}) {
      const auto labels = l.labels();
      SvmConfig cfg;
      cfg.c = c;
      cfg.epochs = 50;
      const auto m = svm_train(l.x, labels, 2, cfg);
      // class 1 is the +1 problem of the one-vs-rest pair
      const std::vector<double> w{m.w(1, 0)};
      const double got = svm_binary_objective(w, m.b[1], l.x, l.signs, c);
      const double oracle = oracle::svm_grid_minimum(l, c);
      CAPTURE(seed);
      CAPTURE(c);
      CAPTURE(got);
      CAPTURE(oracle);
      CHECK(got >= oracle - 1e-9);
      CHECK(got <= 1.01 * oracle);
    }
  }
}

TEST_CASE("training keeps the best iterate and records the objective") {
  const auto l = oracle::noisy_line(4, 60);
  const auto labels = l.labels();
  SvmConfig cfg;
  cfg.epochs = 40;
  const auto m = svm_train(l.x, labels, 2, cfg);
  CHECK(m.objective.size() == 40);
  CHECK(m.classes() == 2);
  CHECK_THROWS_AS(svm_train(l.x, std::vector<int>(60, 1), 2, cfg), ShapeError);
  cfg.c = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("a duplicated cue adds nothing") {
  const auto [rgb, depth] = bench::synth_two_cue(400, 0.5, 0.0, 21);
  const auto [rgb_t, depth_t] = bench::synth_two_cue(400, 0.5, 0.0, 22);
  (void)depth;
  (void)depth_t;
  const auto a = as_features(rgb, "rgb"), at = as_features(rgb_t, "rgb");
  const auto aa = concat_cues(a, a), aat = concat_cues(at, at);
  const double single = accuracy(svm_train(a.x, a.labels, 4), at.x, at.labels);
  const double twice = accuracy(svm_train(aa.x, aa.labels, 4), aat.x, aat.labels);
  // two binomial standard errors at n = 400
  const double se = std::sqrt(single * (1 - single) / 400.0);
  CAPTURE(single);
  CAPTURE(twice);
  CHECK(std::abs(single - twice) <= 2 * se + 1e-12);
}

TEST_CASE("complementary cues beat either cue alone") {
  const auto [rgb, depth] = bench::synth_two_cue(400, 0.5, 0.0, 31);
  const auto [rgb_t, depth_t] = bench::synth_two_cue(400, 0.5, 0.0, 32);
  const auto r = as_features(rgb, "rgb"), d = as_features(depth, "depth");
  const auto rt = as_features(rgb_t, "rgb"), dt = as_features(depth_t, "depth");
  const double ra = accuracy(svm_train(r.x, r.labels, 4), rt.x, rt.labels);
  const double da = accuracy(svm_train(d.x, d.labels, 4), dt.x, dt.labels);
  const auto both = concat_cues(r, d), both_t = concat_cues(rt, dt);
  const double ca = accuracy(svm_train(both.x, both.labels, 4), both_t.x, both_t.labels);
  CAPTURE(ra);
  CAPTURE(da);
  CAPTURE(ca);
  CHECK(ca >= std::max(ra, da) + 0.05);
}

TEST_CASE("rgbd pipeline on the two-cue task") {
  const auto [rgb, depth] = bench::synth_two_cue(300, 0.5, 0.5, 41);
  const auto [rgb_t, depth_t] = bench::synth_two_cue(300, 0.5, 0.5, 42);
  const std::vector<std::size_t> hidden{16};
  TrainConfig tc;
  tc.epochs = 10;
  tc.batch_size = 32;
  const auto rn = train_source_only(make_model(mlp(Role::classifier, rgb.dim(), hidden, 4), 1), rgb, rgb_t, tc);
  const auto dn =
      train_source_only(make_model(mlp(Role::classifier, depth.dim(), hidden, 4), 2), depth, depth_t, tc);
  const auto res = rgbd_pipeline(rn.model, dn.model, rgb, depth, rgb_t, depth_t);
  CAPTURE(res.rgb_accuracy);
  CAPTURE(res.depth_accuracy);
  CAPTURE(res.combined_accuracy);
  CHECK(res.combined_accuracy >= std::max(res.rgb_accuracy, res.depth_accuracy) + 0.05);
  CHECK(res.source_used == 300);
  CHECK(res.target_used == 300);
}

TEST_CASE("depth samples over the null threshold drop with their partner") {
  auto [rgb, depth] = bench::synth_two_cue(120, 0.5, 0.0, 51);
  auto [rgb_t, depth_t] = bench::synth_two_cue(120, 0.5, 0.0, 52);
  depth.null_fraction[3] = 0.9;
  depth.null_fraction[4] = 0.75;
  depth_t.null_fraction[0] = 0.76;
  const std::vector<std::size_t> hidden{8};
  const Model rn = make_model(mlp(Role::classifier, rgb.dim(), hidden, 4), 1);
  const Model dn = make_model(mlp(Role::classifier, depth.dim(), hidden, 4), 2);
  const auto res = rgbd_pipeline(rn, dn, rgb, depth, rgb_t, depth_t);
  CHECK(res.source_used == 119);
  CHECK(res.target_used == 119);
}

TEST_CASE("concatenation checks alignment and applies weights") {
  FeatureSet a, b;
  a.x = Tensor::from_rows({{1, 2}, {3, 4}});
  a.ids = {"p", "q"};
  a.labels = {0, 1};
  a.cue = "rgb";
  b.x = Tensor::from_rows({{5}, {6}});
  b.ids = {"p", "q"};
  b.labels = {0, 1};
  b.cue = "depth";
  const auto c = concat_cues(a, b, {2.0, 0.5});
  CHECK(c.x == Tensor::from_rows({{2, 4, 2.5}, {6, 8, 3}}));
  b.ids = {"p", "z"};
  try {
    concat_cues(a, b);
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("q") != std::string::npos);
  }
}

TEST_CASE("features persist exactly") {
  const auto [rgb, depth] = bench::synth_two_cue(20, 0.5, 0.0, 61);
  (void)depth;
  const auto f = as_features(rgb, "rgb");
  const auto path = std::filesystem::temp_directory_path() / "shiftbench_features.ckpt";
  save_features(path, f);
  const auto back = load_features(path);
  CHECK(back.x == f.x);
  CHECK(back.ids == f.ids);
  CHECK(back.labels == f.labels);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".ids.csv");
}

TEST_CASE("extracted features come from the penultimate activation") {
  const auto [rgb, depth] = bench::synth_two_cue(10, 0.5, 0.0, 71);
  (void)depth;
  const std::vector<std::size_t> hidden{6, 5};
  const Model m = make_model(mlp(Role::classifier, rgb.dim(), hidden, 4), 3);
  const auto f = extract_features(m, rgb, "rgb");
  CHECK(f.x.cols() == 5);
  CHECK(f.ids == rgb.ids);
  CHECK(extract_features(m, rgb, "rgb", 0).x.cols() == 6);
}

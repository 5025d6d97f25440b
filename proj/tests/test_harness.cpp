#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"

using namespace shiftbench;
using namespace shiftbench::bench;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = fs::path(SHIFTBENCH_SOURCE_DIR) / "configs";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ExperimentConfig small_moons(Algorithm a) {
  ExperimentConfig c;
  c.name = "small";
  c.algorithm = a;
  c.data.synth.n_source = 200;
  c.data.synth.n_target = 200;
  c.hidden = {8};
  c.train.epochs = 4;
  c.train.batch_size = 32;
  return c;
}

}  // namespace

TEST_CASE("synthetic generators are seeded and well formed") {
  SynthParams p;
  const auto a = synth_shift_dataset(p, 7), b = synth_shift_dataset(p, 7), c = synth_shift_dataset(p, 8);
  CHECK(a.source.x == b.source.x);
  CHECK(a.target.y == b.target.y);
  CHECK(!(a.source.x == c.source.x));
  CHECK(a.source.size() == 600);
  CHECK(a.source.ids.front() == "s0");
  CHECK(a.target.ids.front() == "t0");
  a.source.validate();
  // the rotation leaves the source centroid where the target centroid is
  double sx = 0, sy = 0, tx = 0, ty = 0;
  for (std::size_t i = 0; i < 600; ++i) {
    sx += a.source.x(i, 0);
    sy += a.source.x(i, 1);
    tx += a.target.x(i, 0);
    ty += a.target.x(i, 1);
  }
  CHECK(std::abs(sx - tx) / 600 < 0.1);
  CHECK(std::abs(sy - ty) / 600 < 0.1);
  p.noise = -1;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("dataset CSV round trip") {
  const auto d = synth_shift_dataset(SynthParams{}, 3).source;
  TempDir t("shiftbench_csv");
  write_dataset_csv(t.path / "d.csv", d);
  const auto back = read_dataset_csv(t.path / "d.csv");
  CHECK(back.x == d.x);
  CHECK(back.y == d.y);
  CHECK(back.ids == d.ids);
  CHECK(back.instances == d.instances);
  CHECK(back.distance_mm == d.distance_mm);
  std::ofstream(t.path / "bad.csv") << "a,b\n1,2\n";
  CHECK_THROWS_AS(read_dataset_csv(t.path / "bad.csv"), IoError);
}

TEST_CASE("group-2 splits are disjoint and cover the target") {
  const auto d = synth_shift_dataset(SynthParams{}, 4).target;
  for (auto kind : {SplitKind::group2_by_instance, SplitKind::group2_fixed_count}) {
    for (std::size_t index = 0; index < 3; ++index) {
      SplitPolicy p;
      p.kind = kind;
      p.index = index;
      p.test_per_class = 50;
      const auto s = make_split_indices(d.y, d.instances, p);
      std::set<std::size_t> a(s.adapt.begin(), s.adapt.end()), t(s.test.begin(), s.test.end());
      CHECK(a.size() == s.adapt.size());
      CHECK(t.size() == s.test.size());
      for (auto i : t) CHECK(a.count(i) == 0);
      CHECK(a.size() + t.size() == d.size());
      CHECK(!t.empty());
      if (kind == SplitKind::group2_by_instance) {
        std::set<std::string> ia, it;
        for (auto i : a) ia.insert(d.instances[i]);
        for (auto i : t) it.insert(d.instances[i]);
        for (const auto& n : it) CHECK(ia.count(n) == 0);
      } else {
        std::map<int, std::size_t> per;
        for (auto i : t) ++per[d.y[i]];
        for (const auto& [label, n] : per) CHECK(n == 50);
      }
    }
  }
  SplitPolicy g1;
  const auto s = make_split_indices(d.y, d.instances, g1);
  CHECK(s.adapt == s.test);
  CHECK(s.adapt.size() == d.size());
}

TEST_CASE("infeasible splits name the problem") {
  const std::vector<int> y{0, 0, 1, 1};
  const std::vector<std::string> inst{"a", "a", "b", "c"};
  SplitPolicy p;
  p.kind = SplitKind::group2_by_instance;
  CHECK_THROWS_AS(make_split_indices(y, inst, p), ConfigError);
  p.kind = SplitKind::group2_fixed_count;
  p.test_per_class = 2;
  CHECK_THROWS_AS(make_split_indices(y, inst, p), ConfigError);
}

TEST_CASE("null filter is strict at the 0.75 boundary") {
  const std::vector<double> nulls{0.0, 0.74, 0.75, std::nextafter(0.75, 1.0), 0.9, 1.0};
  const std::vector<double> dist(nulls.size(), 1000.0);
  const auto keep = filter_indices(nulls, dist, FilterSpec{});
  CHECK(keep == std::vector<std::size_t>{0, 1, 2});
  FilterSpec ranged;
  ranged.range = DistanceRange{500, 1000};
  CHECK_THROWS_AS(filter_indices(nulls, dist, ranged), ConfigError);
  const std::vector<double> dist2{500, 999.9, 1000, 400, 700, 800};
  CHECK(filter_indices(nulls, dist2, ranged) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("distance ranges parse") {
  const auto r = parse_range("1000-1500");
  CHECK(r.lo == 1000);
  CHECK(r.hi == 1500);
  CHECK(r.contains(1000));
  CHECK(!r.contains(1500));
  CHECK_THROWS_AS(parse_range("1500-1000"), ConfigError);
  CHECK_THROWS_AS(parse_range("abc"), ConfigError);
}

TEST_CASE("accuracy falls with distance on the noise-by-distance task") {
  const auto cfg = load_config(kConfigs / "moons_distance_noise.json");
  const std::vector<DistanceRange> ranges{{500, 1000}, {1000, 1500}, {1500, 2000}, {2000, 2500}};
  const auto out = distance_sweep(cfg, ranges);
  const auto fp = fingerprint(cfg);
  double prev = 2.0;
  for (const auto& r : ranges) {
    const double acc = out.table.number(fp, "accuracy" + r.label());
    CAPTURE(r.label());
    CHECK(acc < prev);
    prev = acc;
  }
}

TEST_CASE("result tables") {
  ResultTable t;
  t.add("ab", "x", 0.1);
  t.add("ab", "name", std::string("hello, world"));
  std::stringstream ss;
  t.write_csv(ss);
  const auto back = ResultTable::read_csv(ss);
  CHECK(back == t);
  CHECK(back.number("ab", "x") == 0.1);
  CHECK(!back.find("ab", "y"));

  ResultTable u;
  u.add("cd", "x", 0.2);
  u.add("ab", "x", 0.1);
  const std::vector<ResultTable> ab{t, u}, ba{u, t};
  CHECK(ResultTable::merge(ab) == ResultTable::merge(ba));
  CHECK(ResultTable::merge(ab).rows.size() == 3);
  ResultTable clash;
  clash.add("ab", "x", 0.3);
  const std::vector<ResultTable> bad{t, clash};
  CHECK_THROWS_AS(ResultTable::merge(bad), ConfigError);
}

TEST_CASE("experiments reproduce from their fingerprints") {
  const auto cfg = small_moons(Algorithm::dan);
  const auto fp = fingerprint(cfg);
  // the canonical JSON is a fixed point and carries the full configuration
  const auto again = parse_config(config_to_json(cfg));
  CHECK(fingerprint(again) == fp);
  CHECK(config_to_json(again) == config_to_json(cfg));
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(again);
  REQUIRE(!a.failed);
  CHECK(a.table == b.table);
  for (const auto& r : a.table.rows) CHECK(r.fingerprint == fp);
  CHECK(a.table.number(fp, "margin") ==
        a.table.number(fp, "target_accuracy") - a.table.number(fp, "baseline.target_accuracy"));
  auto other = cfg;
  other.train.seed = 8;
  CHECK(fingerprint(other) != fp);
}

TEST_CASE("config parsing rejects what it does not understand") {
  CHECK_THROWS_AS(parse_config(R"({"name": "x", "bogus": 1})"), ConfigError);
  try {
    parse_config(R"({"train": {"epochs": "ten"}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("train.epochs") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"algorithm": "magic"})"), ConfigError);
  for (const auto& e : fs::directory_iterator(kConfigs)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    CHECK_NOTHROW(load_config(e.path()));
  }
  // the image protocol configs parse but point at datasets that are not shipped
  for (const auto& e : fs::directory_iterator(kConfigs / "protocol")) {
    if (fs::exists(kConfigs / "../data/rod")) break;
    CAPTURE(e.path().string());
    try {
      load_config(e.path());
      FAIL("expected the missing dataset to be reported");
    } catch (const ConfigError& err) {
      CHECK(std::string(err.what()).find("data.source") != std::string::npos);
    }
  }
}

TEST_CASE("report pivot stars the best cell") {
  ResultTable t;
  t.add("f1", "meta.algorithm", std::string("dan"));
  t.add("f1", "meta.setting", std::string("moons"));
  t.add("f1", "target_accuracy", 0.9);
  t.add("f1", "baseline.target_accuracy", 0.8);
  t.add("f2", "meta.algorithm", std::string("dann"));
  t.add("f2", "meta.setting", std::string("moons"));
  t.add("f2", "target_accuracy", 0.7);
  t.add("f2", "baseline.target_accuracy", 0.8);
  const auto s = report_table(t);
  CHECK(s.find("0.9000*") != std::string::npos);
  CHECK(s.find("0.7000 ") != std::string::npos);
  CHECK(s.find("source-only") != std::string::npos);
  CHECK(s.find("0.8000 ") != std::string::npos);
}

TEST_CASE("ingest walks a class/instance tree") {
  TempDir t("shiftbench_ingest");
  const fs::path root = t.path / "rod";
  for (const std::string cls : {"apple", "bowl"}) {
    for (const std::string inst : {"a1", "a2"}) {
      fs::create_directories(root / cls / inst);
      for (int f = 0; f < 2; ++f) {
        const auto stem = root / cls / inst / ("f" + std::to_string(f));
        depth::write_ppm(fs::path(stem.string() + ".ppm"), depth::ColorImage(12, 10, {40, 80, 120}));
        auto d = depth::synthetic_scene(12, 10, f, 0.0);
        if (cls == "bowl" && inst == "a2" && f == 1) {
          for (std::size_t i = 0; i < 100; ++i) d.data[i] = 0;  // 100 of 120 null
        }
        depth::write_pgm(fs::path(stem.string() + ".pgm"), d);
      }
    }
  }
  const auto m = ingest(root);
  CHECK(m.class_names == std::vector<std::string>{"apple", "bowl"});
  REQUIRE(m.records.size() == 8);
  for (const auto& r : m.records) {
    CHECK(!r.rgb.empty());
    CHECK(!r.depth.empty());
    CHECK(r.distance_mm > 0.0);
  }
  const auto filtered = apply_filters(m, FilterSpec{});
  CHECK(filtered.records.size() == 7);
  PreprocessOptions opt;
  opt.grid = 4;
  const auto rgb = load_image_dataset(filtered, Modality::rgb, opt);
  CHECK(rgb.size() == 7);
  CHECK(rgb.dim() == 48);
  CHECK(rgb.x(0, 0) == doctest::Approx(40.0 / 255.0));
  const auto dep = load_image_dataset(filtered, Modality::depth, opt);
  CHECK(dep.dim() == 48);
  for (double v : dep.x.data()) CHECK((v >= 0.0 && v <= 1.0));
  CHECK_THROWS_AS(ingest(t.path / "missing"), IoError);
}

TEST_CASE("image resampling") {
  depth::ColorImage c(4, 2);
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t y = 0; y < 2; ++y) c.at(x, y, 0) = static_cast<std::uint8_t>(10 * x);
  }
  CHECK(resize_bilinear(c, 4, 2) == c);
  const auto crop = center_crop(c, 2, 2);
  CHECK(crop.at(0, 0, 0) == 10);
  CHECK(crop.at(1, 0, 0) == 20);
  CHECK_THROWS(center_crop(c, 5, 2));
}

TEST_CASE("dry-run plans mention the algorithm and split") {
  auto cfg = small_moons(Algorithm::adda);
  cfg.split.kind = SplitKind::group2_by_instance;
  const auto plan = describe_plan(cfg);
  CHECK(plan.find("adda") != std::string::npos);
  CHECK(plan.find("group2-by-instance") != std::string::npos);
}

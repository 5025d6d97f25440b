#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "shiftbench/depthcolor.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/rng.hpp"

using namespace shiftbench;
using namespace shiftbench::depth;

namespace {

const std::filesystem::path kData = std::filesystem::path(SHIFTBENCH_SOURCE_DIR) / "tests" / "data";

FloatImage ramp(std::size_t w, std::size_t h, double slope_x, double slope_y) {
  FloatImage z(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) z.at(x, y) = slope_x * double(x) + slope_y * double(y);
  }
  return z;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("normals of planes") {
  const auto flat = surface_normals(FloatImage(8, 6, 0.4));
  for (const auto& n : flat.data) CHECK(n == Normal{0.0, 0.0, 1.0});
  const auto r = surface_normals(ramp(8, 6, 1.0, 0.0));
  const double k = 1.0 / std::sqrt(2.0);
  for (std::size_t y = 1; y + 1 < 6; ++y) {
    for (std::size_t x = 1; x + 1 < 8; ++x) {
      const auto& n = r.at(x, y);
      CHECK(std::abs(n[0] + k) < 1e-12);
      CHECK(std::abs(n[1]) < 1e-12);
      CHECK(std::abs(n[2] - k) < 1e-12);
    }
  }
  CHECK_THROWS(surface_normals(FloatImage(1, 5)));
}

TEST_CASE("normals are unit length and rescale with depth") {
  Rng rng(3);
  FloatImage z(20, 15);
  const double a = rng.uniform(0.1, 0.5), b = rng.uniform(0.1, 0.5);
  for (std::size_t y = 0; y < 15; ++y) {
    for (std::size_t x = 0; x < 20; ++x) z.at(x, y) = std::sin(a * x) * std::cos(b * y);
  }
  for (double s : {1.0, 0.1, 7.0}) {
    FloatImage zs = z;
    for (auto& v : zs.data) v *= s;
    const auto n = surface_normals(zs);
    for (const auto& v : n.data) {
      CHECK(std::abs(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - 1.0) < 1e-9);
      CHECK(v[2] > 0.0);
    }
    // (-s gx, -s gy, 1) direction: x/z ratio scales with s
    const auto n1 = surface_normals(z);
    const auto& p = n.at(5, 5);
    const auto& q = n1.at(5, 5);
    CHECK(p[0] / p[2] == doctest::Approx(s * q[0] / q[2]).epsilon(1e-9));
  }
}

TEST_CASE("normal to colour mapping") {
  NormalField f;
  f.width = 3;
  f.height = 1;
  f.data = {Normal{0, 0, 1}, Normal{1, 0, 0}, Normal{-1, 0, 0}};
  const auto c = normals_to_rgb(f);
  CHECK(c.at(0, 0, 0) == 128);
  CHECK(c.at(0, 0, 1) == 128);
  CHECK(c.at(0, 0, 2) == 255);
  CHECK(c.at(1, 0, 0) == 255);
  CHECK(c.at(2, 0, 0) == 0);
  CHECK(c.at(1, 0, 2) >= 128);
}

TEST_CASE("recursive median fill") {
  DepthImage full(6, 5, 700);
  full.at(2, 3) = 705;
  CHECK(recursive_median_fill(full, 5, 10).data == full.data);

  DepthImage hole(5, 5, 5);
  hole.at(2, 2) = 0;
  const auto once = recursive_median_fill(hole, 3, 1);
  CHECK(once.at(2, 2) == 5);

  DepthImage flood(16, 16, 0);
  flood.at(3, 11) = 1234;
  const auto filled = recursive_median_fill(flood, 5, 16);
  CHECK(filled.null_count() == 0);
  for (auto v : filled.data) CHECK(v == 1234);
  CHECK_THROWS_AS(recursive_median_fill(flood, 3, 2), NumericError);

  DepthImage even(3, 1, 0);
  even.at(0, 0) = 10;
  even.at(2, 0) = 13;
  CHECK(recursive_median_fill(even, 3, 1).at(1, 0) == 12);
}

TEST_CASE("fill never changes valid pixels") {
  const auto scene = synthetic_scene(40, 30, 5, 0.2);
  const auto filled = recursive_median_fill(scene, 5, 100);
  for (std::size_t i = 0; i < scene.data.size(); ++i) {
    if (scene.data[i] != 0) CHECK(filled.data[i] == scene.data[i]);
  }
}

TEST_CASE("bilateral filter limits") {
  for (double v : bilateral_filter(FloatImage(7, 5, 0.3), 2.0, 0.1).data) CHECK(std::abs(v - 0.3) < 1e-15);
  FloatImage step(10, 4, 0.0);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 5; x < 10; ++x) step.at(x, y) = 1.0;
  }
  const auto kept = bilateral_filter(step, 1.5, 1e-3);
  double worst = 0.0;
  for (std::size_t i = 0; i < step.data.size(); ++i) worst = std::max(worst, std::abs(kept.data[i] - step.data[i]));
  CHECK(worst < 1e-12);

  Rng rng(8);
  FloatImage noisy(12, 9);
  for (auto& v : noisy.data) v = rng.uniform();
  const auto wide = bilateral_filter(noisy, 1.2, 1e6);
  const auto ref = oracle::gaussian(noisy, 1.2);
  const auto sep = gaussian_blur(noisy, 1.2);
  for (std::size_t i = 0; i < noisy.data.size(); ++i) {
    CHECK(std::abs(wide.data[i] - ref.data[i]) < 1e-6);
    CHECK(std::abs(sep.data[i] - ref.data[i]) < 1e-12);
  }
  CHECK_THROWS_AS(bilateral_filter(noisy, 0.0, 1.0), ConfigError);
}

TEST_CASE("unsharp mask") {
  ColorImage c(9, 3);
  for (std::size_t y = 0; y < 3; ++y) {
    for (std::size_t x = 0; x < 9; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) c.at(x, y, ch) = x < 4 ? 60 : 180;
    }
  }
  CHECK(unsharp_mask(c, 0.0, 1.0) == c);
  const ColorImage flat(6, 4, {10, 200, 130});
  CHECK(unsharp_mask(flat, 1.5, 1.0) == flat);
  const auto s = unsharp_mask(c, 1.5, 1.0);
  // overshoot next to the edge, then monotone recovery towards the plateaus
  CHECK(s.at(3, 1, 0) < 60);
  CHECK(s.at(4, 1, 0) > 180);
  for (std::size_t x = 1; x <= 3; ++x) CHECK(s.at(x, 1, 0) <= s.at(x - 1, 1, 0));
  for (std::size_t x = 4; x < 8; ++x) CHECK(s.at(x, 1, 0) >= s.at(x + 1, 1, 0));
  const auto floored = unsharp_mask(c, 1.5, 1.0, {0, 0, 128});
  for (std::size_t x = 0; x < 9; ++x) CHECK(floored.at(x, 1, 2) >= 128);
}

TEST_CASE("colorize constant planes and hole-free ramps") {
  const DepthImage plane(10, 8, 900);
  for (auto m : {Method::sn, Method::sn_plus}) {
    const auto c = colorize(plane, m);
    for (std::size_t i = 0; i < c.data.size(); i += 3) {
      CHECK(c.data[i] == 128);
      CHECK(c.data[i + 1] == 128);
      CHECK(c.data[i + 2] == 255);
    }
  }
  DepthImage r(16, 12);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 0; x < 16; ++x) r.at(x, y) = static_cast<std::uint16_t>(1000 + 50 * x);
  }
  SnPlusConfig cfg;
  cfg.amount = 0.0;
  // replicated borders bend the smoothed ramp, so compare away from them
  const auto a = colorize(r, Method::sn_plus, cfg), b = colorize(r, Method::sn, cfg);
  for (std::size_t y = 0; y < 12; ++y) {
    for (std::size_t x = 4; x + 4 < 16; ++x) {
      for (std::size_t ch = 0; ch < 3; ++ch) CHECK(a.at(x, y, ch) == b.at(x, y, ch));
    }
  }
}

TEST_CASE("colorized scenes keep blue at or above 128") {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto scene = synthetic_scene(48, 36, seed, 0.05);
    for (auto m : {Method::sn, Method::sn_plus}) {
      const auto c = colorize(scene, m);
      for (std::size_t i = 2; i < c.data.size(); i += 3) CHECK(c.data[i] >= 128);
    }
  }
}

TEST_CASE("netpbm round trips") {
  const auto scene = synthetic_scene(13, 7, 2);
  std::stringstream pgm;
  write_pgm(pgm, scene);
  CHECK(read_pgm(pgm).data == scene.data);
  const auto rgb = colorize(scene, Method::sn);
  std::stringstream ppm;
  write_ppm(ppm, rgb);
  CHECK(read_ppm(ppm) == rgb);
  std::stringstream commented("P5\n# made by hand\n2 1\n255\n\x05\x07");
  const auto small = read_pgm(commented);
  CHECK(small.at(1, 0) == 7);
  std::stringstream bad("P2\n1 1\n255\n0");
  CHECK_THROWS_AS(read_pgm(bad), IoError);
}

TEST_CASE("method names") {
  CHECK(parse_method("sn") == Method::sn);
  CHECK(parse_method("sn++") == Method::sn_plus);
  CHECK_THROWS_AS(parse_method("hha"), ConfigError);
}

TEST_CASE("golden colorization of the reference scene") {
  const auto scene = read_pgm(kData / "scene.pgm");
  for (auto [m, name] : {std::pair{Method::sn, "scene_sn.ppm"}, std::pair{Method::sn_plus, "scene_snpp.ppm"}}) {
    std::stringstream out;
    write_ppm(out, colorize(scene, m));
    if (std::getenv("SHIFTBENCH_WRITE_GOLDEN")) {
      std::ofstream(kData / name, std::ios::binary) << out.str();
    }
    CAPTURE(name);
    CHECK(out.str() == slurp(kData / name));
  }
}

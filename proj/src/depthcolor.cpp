#include "shiftbench/depthcolor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "shiftbench/error.hpp"
#include "shiftbench/rng.hpp"

namespace shiftbench::depth {

DepthImage::DepthImage(std::size_t w, std::size_t h, std::uint16_t fill)
    : width(w), height(h), data(w * h, fill) {}

std::size_t DepthImage::null_count() const {
  return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint16_t{0}));
}

double DepthImage::null_fraction() const {
  return data.empty() ? 1.0 : static_cast<double>(null_count()) / static_cast<double>(data.size());
}

double DepthImage::median_depth() const {
  std::vector<std::uint16_t> v;
  for (auto d : data) {
    if (d != 0) v.push_back(d);
  }
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (static_cast<double>(v[m - 1]) + v[m]);
}

void DepthImage::validate() const {
  if (width == 0 || height == 0) throw ShapeError("depth image has a zero dimension");
  if (data.size() != width * height) throw ShapeError("depth image buffer size mismatch");
}

ColorImage::ColorImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill)
    : width(w), height(h), data(3 * w * h) {
  for (std::size_t i = 0; i < w * h; ++i) {
    for (std::size_t c = 0; c < 3; ++c) data[3 * i + c] = fill[c];
  }
}

FloatImage::FloatImage(std::size_t w, std::size_t h, double fill)
    : width(w), height(h), data(w * h, fill) {}

namespace {

std::string next_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

struct Header {
  std::size_t width, height, maxval;
};

Header read_header(std::istream& is, std::string_view magic) {
  const std::string m = next_token(is);
  if (m != magic) {
    throw IoError("expected netpbm magic " + std::string(magic) + ", found '" + m + "'");
  }
  Header h{};
  try {
    h.width = std::stoul(next_token(is));
    h.height = std::stoul(next_token(is));
    h.maxval = std::stoul(next_token(is));
  } catch (const std::logic_error&) {
    throw IoError("malformed netpbm header");
  }
  // next_token consumed exactly one whitespace byte after maxval
  if (h.width == 0 || h.height == 0 || h.maxval == 0 || h.maxval > 65535) {
    throw IoError("netpbm header out of range");
  }
  return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return f;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  return f;
}

std::uint8_t round_channel(double v, double lo, double hi) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), lo, hi));
}

std::size_t clamp_index(long i, std::size_t n) {
  return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1));
}

std::vector<double> gaussian_kernel(double sigma, long& radius) {
  radius = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double s = 0.0;
  for (long i = -radius; i <= radius; ++i) {
    const double v = std::exp(-static_cast<double>(i * i) / (2.0 * sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    s += v;
  }
  for (auto& v : k) v /= s;
  return k;
}

}  // namespace

DepthImage read_pgm(std::istream& is) {
  const Header h = read_header(is, "P5");
  DepthImage img(h.width, h.height);
  const bool wide = h.maxval > 255;
  for (auto& px : img.data) {
    if (wide) {
      unsigned char b[2];
      if (!is.read(reinterpret_cast<char*>(b), 2)) throw IoError("truncated PGM data");
      px = static_cast<std::uint16_t>((b[0] << 8) | b[1]);
    } else {
      const int c = is.get();
      if (c == EOF) throw IoError("truncated PGM data");
      px = static_cast<std::uint16_t>(c);
    }
  }
  return img;
}

DepthImage read_pgm(const std::filesystem::path& path) {
  auto f = open_in(path);
  try {
    return read_pgm(f);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_pgm(std::ostream& os, const DepthImage& img) {
  img.validate();
  os << "P5\n" << img.width << ' ' << img.height << "\n65535\n";
  for (auto px : img.data) {
    const char b[2] = {static_cast<char>(px >> 8), static_cast<char>(px & 0xff)};
    os.write(b, 2);
  }
}

void write_pgm(const std::filesystem::path& path, const DepthImage& img) {
  auto f = open_out(path);
  write_pgm(f, img);
}

ColorImage read_ppm(std::istream& is) {
  const Header h = read_header(is, "P6");
  if (h.maxval > 255) throw IoError("16-bit PPM is not supported");
  ColorImage img(h.width, h.height);
  if (!is.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()))) {
    throw IoError("truncated PPM data");
  }
  return img;
}

ColorImage read_ppm(const std::filesystem::path& path) {
  auto f = open_in(path);
  try {
    return read_ppm(f);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_ppm(std::ostream& os, const ColorImage& img) {
  os << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  os.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
}

void write_ppm(const std::filesystem::path& path, const ColorImage& img) {
  auto f = open_out(path);
  write_ppm(f, img);
}

FloatImage normalize_depth(const DepthImage& d) {
  d.validate();
  std::uint16_t lo = 0xffff, hi = 0;
  for (auto v : d.data) {
    if (v == 0) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  FloatImage out(d.width, d.height, 0.0);
  if (hi <= lo) return out;
  const double span = static_cast<double>(hi - lo);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    if (d.data[i] != 0) out.data[i] = static_cast<double>(d.data[i] - lo) / span;
  }
  return out;
}

NormalField surface_normals(const FloatImage& z, const std::vector<bool>* mask) {
  const std::size_t w = z.width, h = z.height;
  if (w < 2 || h < 2) {
    throw ShapeError("surface normals need at least 2x2 pixels, got " + std::to_string(w) + "x" +
                     std::to_string(h));
  }
  if (mask && mask->size() != w * h) throw ShapeError("normal mask size mismatch");
  NormalField n{w, h, std::vector<Normal>(w * h)};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      if (mask && (*mask)[y * w + x]) {
        n.data[y * w + x] = {0.0, 0.0, 1.0};
        continue;
      }
      double dx, dy;
      if (x == 0) dx = z.at(1, y) - z.at(0, y);
      else if (x == w - 1) dx = z.at(w - 1, y) - z.at(w - 2, y);
      else dx = 0.5 * (z.at(x + 1, y) - z.at(x - 1, y));
      if (y == 0) dy = z.at(x, 1) - z.at(x, 0);
      else if (y == h - 1) dy = z.at(x, h - 1) - z.at(x, h - 2);
      else dy = 0.5 * (z.at(x, y + 1) - z.at(x, y - 1));
      const double len = std::sqrt(dx * dx + dy * dy + 1.0);
      n.data[y * w + x] = {-dx / len, -dy / len, 1.0 / len};
    }
  }
  return n;
}

ColorImage normals_to_rgb(const NormalField& n) {
  ColorImage img(n.width, n.height);
  for (std::size_t i = 0; i < n.data.size(); ++i) {
    const auto& v = n.data[i];
    img.data[3 * i + 0] = round_channel((v[0] + 1.0) * 127.5, 0.0, 255.0);
    img.data[3 * i + 1] = round_channel((v[1] + 1.0) * 127.5, 0.0, 255.0);
    img.data[3 * i + 2] = round_channel(128.0 + 127.0 * v[2], 128.0, 255.0);
  }
  return img;
}

DepthImage recursive_median_fill(const DepthImage& d, std::size_t window, std::size_t max_iter) {
  d.validate();
  if (window < 3 || window % 2 == 0) {
    throw ConfigError("median window must be odd and >= 3, got " + std::to_string(window));
  }
  if (d.null_count() == d.data.size()) throw NumericError("median fill: every pixel is null");
  const long r = static_cast<long>(window / 2);
  DepthImage cur = d;
  std::vector<std::uint16_t> vals;
  for (std::size_t iter = 0; iter < max_iter && cur.null_count() > 0; ++iter) {
    DepthImage next = cur;
    for (std::size_t y = 0; y < cur.height; ++y) {
      for (std::size_t x = 0; x < cur.width; ++x) {
        if (!cur.is_null(x, y)) continue;
        vals.clear();
        for (long dy = -r; dy <= r; ++dy) {
          for (long dx = -r; dx <= r; ++dx) {
            const long xx = static_cast<long>(x) + dx, yy = static_cast<long>(y) + dy;
            if (xx < 0 || yy < 0 || xx >= static_cast<long>(cur.width) || yy >= static_cast<long>(cur.height)) {
              continue;
            }
            const auto v = cur.at(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
            if (v != 0) vals.push_back(v);
          }
        }
        if (vals.empty()) continue;
        std::sort(vals.begin(), vals.end());
        const std::size_t m = vals.size() / 2;
        next.at(x, y) = vals.size() % 2
                            ? vals[m]
                            : static_cast<std::uint16_t>((static_cast<unsigned>(vals[m - 1]) + vals[m] + 1) / 2);
      }
    }
    cur = std::move(next);
  }
  if (const auto left = cur.null_count(); left > 0) {
    throw NumericError("median fill left " + std::to_string(left) + " null pixels after " +
                       std::to_string(max_iter) + " iterations");
  }
  return cur;
}

FloatImage gaussian_blur(const FloatImage& img, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be positive");
  long r;
  const auto k = gaussian_kernel(sigma, r);
  FloatImage tmp(img.width, img.height), out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i) {
        s += k[static_cast<std::size_t>(i + r)] * img.at(clamp_index(static_cast<long>(x) + i, img.width), y);
      }
      tmp.at(x, y) = s;
    }
  }
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (long i = -r; i <= r; ++i) {
        s += k[static_cast<std::size_t>(i + r)] * tmp.at(x, clamp_index(static_cast<long>(y) + i, img.height));
      }
      out.at(x, y) = s;
    }
  }
  return out;
}

FloatImage bilateral_filter(const FloatImage& img, double sigma_spatial, double sigma_range) {
  if (!(sigma_spatial > 0.0) || !(sigma_range > 0.0)) {
    throw ConfigError("bilateral sigmas must be positive");
  }
  const long r = static_cast<long>(std::ceil(3.0 * sigma_spatial));
  const double ks = 1.0 / (2.0 * sigma_spatial * sigma_spatial);
  const double kr = 1.0 / (2.0 * sigma_range * sigma_range);
  FloatImage out(img.width, img.height);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double c = img.at(x, y);
      double num = 0.0, den = 0.0;
      for (long dy = -r; dy <= r; ++dy) {
        const std::size_t yy = clamp_index(static_cast<long>(y) + dy, img.height);
        for (long dx = -r; dx <= r; ++dx) {
          const double v = img.at(clamp_index(static_cast<long>(x) + dx, img.width), yy);
          const double wgt = std::exp(-static_cast<double>(dx * dx + dy * dy) * ks - (v - c) * (v - c) * kr);
          num += wgt * v;
          den += wgt;
        }
      }
      out.at(x, y) = num / den;
    }
  }
  return out;
}

ColorImage unsharp_mask(const ColorImage& c, double amount, double radius,
                        std::array<std::uint8_t, 3> floor) {
  if (!(amount >= 0.0)) throw ConfigError("unsharp amount must be >= 0");
  ColorImage out = c;
  if (amount == 0.0) return out;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    FloatImage plane(c.width, c.height);
    for (std::size_t i = 0; i < c.width * c.height; ++i) plane.data[i] = c.data[3 * i + ch];
    const FloatImage blurred = gaussian_blur(plane, radius);
    for (std::size_t i = 0; i < c.width * c.height; ++i) {
      const double v = plane.data[i] + amount * (plane.data[i] - blurred.data[i]);
      out.data[3 * i + ch] = round_channel(v, floor[ch], 255.0);
    }
  }
  return out;
}

Method parse_method(std::string_view name) {
  if (name == "sn") return Method::sn;
  if (name == "sn++" || name == "sn_plus" || name == "snplus") return Method::sn_plus;
  throw ConfigError("unknown colorization method '" + std::string(name) + "' (expected sn or sn++)");
}

void SnPlusConfig::validate() const {
  if (window < 3 || window % 2 == 0) throw ConfigError("window: must be odd and >= 3");
  if (!(sigma_spatial > 0.0)) throw ConfigError("sigma_spatial: must be positive");
  if (!(sigma_range > 0.0)) throw ConfigError("sigma_range: must be positive");
  if (!(amount >= 0.0)) throw ConfigError("amount: must be >= 0");
  if (!(radius > 0.0)) throw ConfigError("radius: must be positive");
  if (!(depth_gain >= 0.0)) throw ConfigError("depth_gain: must be >= 0");
}

ColorImage colorize(const DepthImage& d, Method method, const SnPlusConfig& cfg) {
  cfg.validate();
  d.validate();
  const double gain =
      cfg.depth_gain > 0.0 ? cfg.depth_gain : static_cast<double>(std::max(d.width, d.height));
  auto scaled = [gain](FloatImage z) {
    for (auto& v : z.data) v *= gain;
    return z;
  };
  if (method == Method::sn) {
    std::vector<bool> mask(d.data.size());
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = d.data[i] == 0;
    return normals_to_rgb(surface_normals(scaled(normalize_depth(d)), &mask));
  }
  const DepthImage filled = recursive_median_fill(d, cfg.window, cfg.max_iter);
  const FloatImage smooth = bilateral_filter(normalize_depth(filled), cfg.sigma_spatial, cfg.sigma_range);
  const ColorImage rgb = normals_to_rgb(surface_normals(scaled(smooth)));
  return unsharp_mask(rgb, cfg.amount, cfg.radius, {0, 0, 128});
}

DepthImage synthetic_scene(std::size_t width, std::size_t height, std::uint64_t seed,
                           double null_rate) {
  if (width < 2 || height < 2) throw ShapeError("synthetic scene needs at least 2x2 pixels");
  Rng rng(derive_seed(seed, 41));
  DepthImage img(width, height);
  const double cx = 0.5 * static_cast<double>(width), cy = 0.55 * static_cast<double>(height);
  const double radius = static_cast<double>(std::min(width, height)) / 3.0;
  constexpr double mm_per_px = 4.0;
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      double z = 900.0 + 1.5 * fx + 3.0 * fy;
      const double r2 = (fx - cx) * (fx - cx) + (fy - cy) * (fy - cy);
      if (r2 < radius * radius) {
        const double plane_c = 900.0 + 1.5 * cx + 3.0 * cy;
        z = std::min(z, plane_c - mm_per_px * std::sqrt(radius * radius - r2));
      }
      z += rng.normal(0.0, 1.5);
      const bool hole = rng.uniform() < null_rate;
      img.at(x, y) = hole ? 0 : static_cast<std::uint16_t>(std::clamp(std::floor(z + 0.5), 1.0, 65535.0));
    }
  }
  return img;
}

}  // namespace shiftbench::depth

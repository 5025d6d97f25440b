#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace shiftbench::depth {

/// 16-bit depth in millimeters; 0 marks a missing pixel.
struct DepthImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint16_t> data;

  DepthImage() = default;
  DepthImage(std::size_t w, std::size_t h, std::uint16_t fill = 0);
  std::uint16_t& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  std::uint16_t at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
  bool is_null(std::size_t x, std::size_t y) const { return at(x, y) == 0; }
  std::size_t null_count() const;
  double null_fraction() const;
  /// Median of the non-null values, 0 when every pixel is null.
  double median_depth() const;
  void validate() const;
};

/// Interleaved 8-bit RGB.
struct ColorImage {
  std::size_t width = 0, height = 0;
  std::vector<std::uint8_t> data;  // 3 * width * height

  ColorImage() = default;
  ColorImage(std::size_t w, std::size_t h, std::array<std::uint8_t, 3> fill = {0, 0, 0});
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t ch) { return data[3 * (y * width + x) + ch]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t ch) const {
    return data[3 * (y * width + x) + ch];
  }
  friend bool operator==(const ColorImage&, const ColorImage&) = default;
};

/// Single-channel float image.
struct FloatImage {
  std::size_t width = 0, height = 0;
  std::vector<double> data;

  FloatImage() = default;
  FloatImage(std::size_t w, std::size_t h, double fill = 0.0);
  double& at(std::size_t x, std::size_t y) { return data[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

using Normal = std::array<double, 3>;

struct NormalField {
  std::size_t width = 0, height = 0;
  std::vector<Normal> data;
  const Normal& at(std::size_t x, std::size_t y) const { return data[y * width + x]; }
};

// Netpbm I/O. Depth: binary PGM (P5), maxval up to 65535, big-endian
// samples when maxval > 255. Color: binary PPM (P6), maxval 255.
DepthImage read_pgm(std::istream& is);
DepthImage read_pgm(const std::filesystem::path& path);
void write_pgm(std::ostream& os, const DepthImage& img);
void write_pgm(const std::filesystem::path& path, const DepthImage& img);
ColorImage read_ppm(std::istream& is);
ColorImage read_ppm(const std::filesystem::path& path);
void write_ppm(std::ostream& os, const ColorImage& img);
void write_ppm(const std::filesystem::path& path, const ColorImage& img);

/// Maps valid pixels to [0, 1] by the image's own valid min and max; null
/// pixels become 0. A flat image maps to all zeros.
FloatImage normalize_depth(const DepthImage& d);

/// n = (-dz/dx, -dz/dy, 1) / norm, with central differences inside and
/// one-sided differences on the border. Pixels flagged in `mask` get
/// (0, 0, 1). Images with a side of length 1 are rejected.
NormalField surface_normals(const FloatImage& z, const std::vector<bool>* mask = nullptr);

/// R = round((x+1)*127.5), G = round((y+1)*127.5), B = round(128 + 127z),
/// round half up, clamped to [0,255], [0,255], [128,255].
ColorImage normals_to_rgb(const NormalField& n);

/// Repeatedly replaces every null pixel that has a non-null neighbor in its
/// window by the median of those neighbors (mean of the middle pair, rounded
/// half up, for even counts). Updates within a pass read the previous pass.
/// Throws NumericError when nulls survive max_iter passes.
DepthImage recursive_median_fill(const DepthImage& d, std::size_t window, std::size_t max_iter);

/// Truncated Gaussian kernels use radius ceil(3 sigma); borders replicate.
FloatImage gaussian_blur(const FloatImage& img, double sigma);
FloatImage bilateral_filter(const FloatImage& img, double sigma_spatial, double sigma_range);

/// out = clamp(c + amount (c - blur(c, radius))) per channel, rounded half
/// up. `floor` is the per-channel lower clamp.
ColorImage unsharp_mask(const ColorImage& c, double amount, double radius,
                        std::array<std::uint8_t, 3> floor = {0, 0, 0});

enum class Method { sn, sn_plus };
Method parse_method(std::string_view name);  // "sn", "sn++" or "sn_plus"

struct SnPlusConfig {
  std::size_t window = 5;
  std::size_t max_iter = 100;
  double sigma_spatial = 3.0;
  double sigma_range = 0.05;  // in normalized depth units
  double amount = 1.5;
  double radius = 1.0;
  // Multiplier on normalized depth before differentiation; 0 picks
  // max(width, height) so that a full-range ramp across the image is a 45
  // degree slope.
  double depth_gain = 0.0;

  void validate() const;
};

/// sn:      normalize -> normals (nulls masked) -> rgb
/// sn_plus: fill -> normalize -> bilateral -> normals -> rgb -> unsharp
ColorImage colorize(const DepthImage& d, Method method, const SnPlusConfig& cfg = {});

/// Seeded synthetic scene: a sphere resting on a tilted plane, with sensor
/// noise and a sprinkling of null pixels.
DepthImage synthetic_scene(std::size_t width, std::size_t height, std::uint64_t seed,
                           double null_rate = 0.02);

}  // namespace shiftbench::depth

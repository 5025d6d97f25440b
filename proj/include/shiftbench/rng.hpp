#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace shiftbench {

// Seeded generator with hand-written distributions. The std:: distributions
// are implementation-defined, so they would break cross-platform
// reproducibility of datasets and initial weights.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n);

  /// Fisher-Yates shuffle of an index vector.
  void shuffle(std::vector<std::size_t>& v);

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Mixes a base seed with a stream tag so independent consumers
/// (per-network init, per-domain batch order) never share a stream.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// FNV-1a over raw bytes; used for fingerprints and checksums.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 14695981039346656037ull);

}  // namespace shiftbench

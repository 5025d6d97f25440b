#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"

namespace shiftbench::bench {

std::string to_string(SynthKind kind) {
  switch (kind) {
    case SynthKind::moons_rotate: return "moons-rotate";
    case SynthKind::blobs_shift: return "blobs-shift";
    case SynthKind::moons_distance_noise: return "moons-distance-noise";
    case SynthKind::two_cue: return "two-cue";
  }
  return "?";
}

SynthKind parse_synth_kind(std::string_view name) {
  for (auto k : {SynthKind::moons_rotate, SynthKind::blobs_shift, SynthKind::moons_distance_noise,
                 SynthKind::two_cue}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("data.generator: unknown generator '" + std::string(name) +
                    "' (moons-rotate, blobs-shift, moons-distance-noise, two-cue)");
}

void SynthParams::validate() const {
  if (n_source == 0 || n_target == 0) throw ConfigError("data.n_source/n_target: must be positive");
  if (!(noise >= 0.0)) throw ConfigError("data.noise: must be >= 0");
  if (kind == SynthKind::blobs_shift && (classes < 2 || dim < 2)) {
    throw ConfigError("data.classes/dim: blobs need at least 2 classes and 2 dimensions");
  }
  if (instances == 0) throw ConfigError("data.instances: must be positive");
  if (!(max_label_noise >= 0.0 && max_label_noise <= 1.0)) {
    throw ConfigError("data.max_label_noise: must lie in [0, 1]");
  }
  if (!std::isfinite(rotation_deg) || !std::isfinite(shift)) {
    throw ConfigError("data.rotation_deg/shift: must be finite");
  }
}

namespace {

struct Builder {
  Dataset d;
  std::vector<std::size_t> per_class;
  std::size_t instances;
  char prefix;

  Builder(std::size_t n, std::size_t dim, std::size_t classes, std::size_t inst, char p)
      : per_class(classes, 0), instances(inst), prefix(p) {
    d.x = Tensor::matrix(n, dim);
    d.num_classes = classes;
  }
  void push(int label, double distance) {
    const std::size_t i = d.y.size();
    d.y.push_back(label);
    d.ids.push_back(prefix + std::to_string(i));
    const std::size_t k = per_class[static_cast<std::size_t>(label)]++ % instances;
    d.instances.push_back("c" + std::to_string(label) + "-i" + std::to_string(k));
    d.distance_mm.push_back(distance);
    d.null_fraction.push_back(0.0);
  }
};

// Two interleaving half circles centred on the origin.
Dataset moons(std::size_t n, const SynthParams& p, Rng& rng, double angle_deg, char prefix,
              double label_noise) {
  Builder b(n, 2, 2, p.instances, prefix);
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double t = rng.uniform(0.0, std::numbers::pi);
    double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x += rng.normal(0.0, p.noise) - 0.5;
    y += rng.normal(0.0, p.noise) - 0.25;
    b.d.x(i, 0) = ca * x - sa * y;
    b.d.x(i, 1) = sa * x + ca * y;
    const double dist = rng.uniform(500.0, 2500.0);
    const double flip = label_noise * (dist - 500.0) / 2000.0;
    const bool flipped = rng.uniform() < flip;
    b.push(flipped ? 1 - label : label, dist);
  }
  return std::move(b.d);
}

Dataset blobs(std::size_t n, const SynthParams& p, Rng& rng, double shift, char prefix) {
  Builder b(n, p.dim, p.classes, p.instances, prefix);
  const double step = shift / std::sqrt(static_cast<double>(p.dim));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % p.classes);
    const double phi = 2.0 * std::numbers::pi * label / static_cast<double>(p.classes);
    for (std::size_t c = 0; c < p.dim; ++c) {
      double centre = c == 0 ? 3.0 * std::cos(phi) : c == 1 ? 3.0 * std::sin(phi) : 0.0;
      b.d.x(i, c) = centre + step + rng.normal(0.0, p.noise);
    }
    b.push(label, rng.uniform(500.0, 2500.0));
  }
  return std::move(b.d);
}

}  // namespace

DomainPair synth_shift_dataset(const SynthParams& p, std::uint64_t seed) {
  p.validate();
  Rng rs(derive_seed(seed, 51));
  Rng rt(derive_seed(seed, 52));
  DomainPair out;
  switch (p.kind) {
    case SynthKind::moons_rotate:
      out.source = moons(p.n_source, p, rs, 0.0, 's', 0.0);
      out.target = moons(p.n_target, p, rt, p.rotation_deg, 't', 0.0);
      break;
    case SynthKind::moons_distance_noise:
      out.source = moons(p.n_source, p, rs, 0.0, 's', 0.0);
      out.target = moons(p.n_target, p, rt, p.rotation_deg, 't', p.max_label_noise);
      break;
    case SynthKind::blobs_shift:
      out.source = blobs(p.n_source, p, rs, 0.0, 's');
      out.target = blobs(p.n_target, p, rt, p.shift, 't');
      break;
    case SynthKind::two_cue:
      out.source = synth_two_cue(p.n_source, p.noise, 0.0, derive_seed(seed, 53)).first;
      out.target = synth_two_cue(p.n_target, p.noise, p.shift, derive_seed(seed, 54)).first;
      for (auto& id : out.target.ids) id[0] = 't';
      break;
  }
  return out;
}

std::pair<Dataset, Dataset> synth_two_cue(std::size_t n, double noise, double shift, std::uint64_t seed) {
  if (n == 0) throw ConfigError("two-cue generator needs at least one sample");
  Rng rng(derive_seed(seed, 55));
  Builder rgb(n, 2, 4, 1, 's'), dep(n, 2, 4, 1, 's');
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 4);
    const double pair_a = label < 2 ? -2.0 : 2.0;        // {0,1} vs {2,3}
    const double pair_b = label % 2 == 0 ? -2.0 : 2.0;   // {0,2} vs {1,3}
    rgb.d.x(i, 0) = pair_a + shift + rng.normal(0.0, noise);
    rgb.d.x(i, 1) = shift + rng.normal(0.0, noise);
    dep.d.x(i, 0) = shift + rng.normal(0.0, noise);
    dep.d.x(i, 1) = pair_b + shift + rng.normal(0.0, noise);
    const double dist = rng.uniform(500.0, 2500.0);
    rgb.push(label, dist);
    dep.push(label, dist);
  }
  return {std::move(rgb.d), std::move(dep.d)};
}

void write_dataset_csv(std::ostream& os, const Dataset& d) {
  d.validate();
  os << "id,label,instance,distance_mm,null_fraction";
  for (std::size_t c = 0; c < d.dim(); ++c) os << ",f" << c;
  os << '\n';
  const auto old = os.precision(17);
  for (std::size_t i = 0; i < d.size(); ++i) {
    os << d.ids[i] << ',' << d.y[i] << ',' << d.instances[i] << ',' << d.distance_mm[i] << ','
       << d.null_fraction[i];
    for (double v : d.x.row(i)) os << ',' << v;
    os << '\n';
  }
  os.precision(old);
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& d) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  write_dataset_csv(f, d);
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::logic_error&) {
    throw IoError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  }
}

}  // namespace

Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open dataset " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw IoError(path.string() + ": empty file");
  const auto header = split_commas(line);
  const std::vector<std::string> fixed{"id", "label", "instance", "distance_mm", "null_fraction"};
  if (header.size() <= fixed.size() || !std::equal(fixed.begin(), fixed.end(), header.begin())) {
    throw IoError(path.string() + ": expected header id,label,instance,distance_mm,null_fraction,f0,...");
  }
  const std::size_t dim = header.size() - fixed.size();
  Dataset d;
  std::vector<double> values;
  int max_label = -1;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(header.size()) + " columns");
    }
    d.ids.push_back(cells[0]);
    const double label = to_double(cells[1], path, lineno);
    if (label < 0 || label != std::floor(label)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad label");
    }
    d.y.push_back(static_cast<int>(label));
    max_label = std::max(max_label, d.y.back());
    d.instances.push_back(cells[2]);
    d.distance_mm.push_back(to_double(cells[3], path, lineno));
    d.null_fraction.push_back(to_double(cells[4], path, lineno));
    for (std::size_t c = 0; c < dim; ++c) values.push_back(to_double(cells[5 + c], path, lineno));
  }
  if (d.ids.empty()) throw IoError(path.string() + ": no samples");
  d.x = Tensor({d.ids.size(), dim}, std::move(values));
  d.num_classes = static_cast<std::size_t>(max_label + 1);
  d.validate();
  return d;
}

}  // namespace shiftbench::bench

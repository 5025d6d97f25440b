#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"

namespace shiftbench::bench {

namespace fs = std::filesystem;

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.id).second) throw ConfigError("manifest: duplicate id " + r.id);
    if (r.label < 0 || static_cast<std::size_t>(r.label) >= class_names.size()) {
      throw ConfigError("manifest: record " + r.id + " has label out of range");
    }
    if (!(r.null_fraction >= 0.0 && r.null_fraction <= 1.0)) {
      throw ConfigError("manifest: record " + r.id + " has null fraction outside [0, 1]");
    }
    for (const auto* p : {&r.rgb, &r.depth}) {
      if (!p->empty() && !fs::exists(*p)) throw IoError("manifest: missing file " + p->string());
    }
  }
}

namespace {

std::vector<fs::path> sorted_dirs(const fs::path& p) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(p)) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

void apply_overrides(DatasetManifest& m, const fs::path& csv) {
  std::ifstream f(csv);
  if (!f) throw IoError("cannot open " + csv.string());
  std::string line;
  std::getline(f, line);
  const auto header = split_line(line);
  auto col = [&](const char* name) -> long {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const long cid = col("id"), cdist = col("distance_mm"), cnull = col("null_fraction");
  if (cid < 0) throw IoError(csv.string() + ": header lacks an id column");
  std::map<std::string, Record*> by_id;
  for (auto& r : m.records) by_id[r.id] = &r;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_line(line);
    auto cell = [&](long c) -> const std::string& {
      if (c >= static_cast<long>(cells.size())) {
        throw IoError(csv.string() + ":" + std::to_string(lineno) + ": too few columns");
      }
      return cells[static_cast<std::size_t>(c)];
    };
    auto it = by_id.find(cell(cid));
    if (it == by_id.end()) {
      throw IoError(csv.string() + ":" + std::to_string(lineno) + ": unknown id " + cell(cid));
    }
    try {
      if (cdist >= 0 && !cell(cdist).empty()) it->second->distance_mm = std::stod(cell(cdist));
      if (cnull >= 0 && !cell(cnull).empty()) it->second->null_fraction = std::stod(cell(cnull));
    } catch (const std::logic_error&) {
      throw IoError(csv.string() + ":" + std::to_string(lineno) + ": not a number");
    }
  }
}

}  // namespace

DatasetManifest ingest(const fs::path& root) {
  if (!fs::is_directory(root)) throw IoError("dataset root " + root.string() + " is not a directory");
  DatasetManifest m;
  m.root = root;
  for (const auto& cls : sorted_dirs(root)) {
    const int label = static_cast<int>(m.class_names.size());
    const std::string cname = cls.filename().string();
    std::size_t count = 0;
    for (const auto& inst : sorted_dirs(cls)) {
      std::map<std::string, Record> frames;
      for (const auto& e : fs::directory_iterator(inst)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        if (ext != ".ppm" && ext != ".pgm") continue;
        const std::string stem = e.path().stem().string();
        Record& r = frames[stem];
        r.id = cname + "/" + inst.filename().string() + "/" + stem;
        r.label = label;
        r.instance = cname + "/" + inst.filename().string();
        (ext == ".ppm" ? r.rgb : r.depth) = e.path();
      }
      for (auto& [stem, r] : frames) {
        if (!r.depth.empty()) {
          const auto d = depth::read_pgm(r.depth);
          r.null_fraction = d.null_fraction();
          r.distance_mm = d.median_depth();
        }
        m.records.push_back(std::move(r));
        ++count;
      }
    }
    if (count == 0) throw IoError("class '" + cname + "' has no images under " + cls.string());
    m.class_names.push_back(cname);
  }
  if (m.class_names.empty()) throw IoError("no class directories under " + root.string());
  if (fs::exists(root / "manifest.csv")) apply_overrides(m, root / "manifest.csv");
  m.validate();
  return m;
}

void write_manifest_csv(std::ostream& os, const DatasetManifest& m) {
  os << "id,class,label,instance,rgb,depth,distance_mm,null_fraction\n";
  for (const auto& r : m.records) {
    os << r.id << ',' << m.class_names[static_cast<std::size_t>(r.label)] << ',' << r.label << ','
       << r.instance << ',' << r.rgb.string() << ',' << r.depth.string() << ',' << r.distance_mm << ','
       << r.null_fraction << '\n';
  }
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::rgb: return "rgb";
    case Modality::depth: return "depth";
    case Modality::rgbd: return "rgbd";
  }
  return "?";
}

Modality parse_modality(std::string_view name) {
  for (auto m : {Modality::rgb, Modality::depth, Modality::rgbd}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("modality: unknown value '" + std::string(name) + "' (rgb, depth, rgbd)");
}

depth::ColorImage resize_bilinear(const depth::ColorImage& img, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0) throw ConfigError("resize: target size must be positive");
  depth::ColorImage out(w, h);
  const double sx = static_cast<double>(img.width) / static_cast<double>(w);
  const double sy = static_cast<double>(img.height) / static_cast<double>(h);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(img.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, img.height - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(img.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, img.width - 1);
      const double tx = fx - static_cast<double>(x0);
      for (std::size_t c = 0; c < 3; ++c) {
        const double top = (1 - tx) * img.at(x0, y0, c) + tx * img.at(x1, y0, c);
        const double bot = (1 - tx) * img.at(x0, y1, c) + tx * img.at(x1, y1, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor((1 - ty) * top + ty * bot + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

depth::ColorImage center_crop(const depth::ColorImage& img, std::size_t w, std::size_t h) {
  if (w == 0 || h == 0 || w > img.width || h > img.height) {
    throw ConfigError("crop " + std::to_string(w) + "x" + std::to_string(h) + " does not fit image " +
                      std::to_string(img.width) + "x" + std::to_string(img.height));
  }
  depth::ColorImage out(w, h);
  const std::size_t ox = (img.width - w) / 2, oy = (img.height - h) / 2;
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) out.at(x, y, c) = img.at(ox + x, oy + y, c);
    }
  }
  return out;
}

Dataset load_image_dataset(const DatasetManifest& m, Modality modality, const PreprocessOptions& opt) {
  if (modality == Modality::rgbd) throw ConfigError("load_image_dataset: load rgb and depth separately");
  if (opt.grid == 0) throw ConfigError("data.grid: must be positive");
  const std::size_t dim = opt.grid * opt.grid * 3;
  Dataset d;
  d.num_classes = m.class_names.size();
  d.x = Tensor::matrix(m.records.size(), dim);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const Record& r = m.records[i];
    const fs::path& p = modality == Modality::rgb ? r.rgb : r.depth;
    if (p.empty()) throw IoError("record " + r.id + " has no " + to_string(modality) + " image");
    depth::ColorImage img = modality == Modality::rgb
                                ? depth::read_ppm(p)
                                : depth::colorize(depth::read_pgm(p), opt.depth_method, opt.colorize);
    if (opt.resize) img = resize_bilinear(img, opt.resize->first, opt.resize->second);
    if (opt.crop) img = center_crop(img, opt.crop->first, opt.crop->second);
    img = resize_bilinear(img, opt.grid, opt.grid);
    auto row = d.x.row(i);
    for (std::size_t k = 0; k < dim; ++k) row[k] = img.data[k] / 255.0;
    d.y.push_back(r.label);
    d.ids.push_back(r.id);
    d.instances.push_back(r.instance);
    d.distance_mm.push_back(r.distance_mm);
    d.null_fraction.push_back(r.null_fraction);
  }
  d.validate();
  return d;
}

std::string DistanceRange::label() const {
  std::ostringstream os;
  os << '[' << lo << ',' << hi << ')';
  return os.str();
}

DistanceRange parse_range(std::string_view text) {
  const auto dash = text.find('-', 1);
  if (dash == std::string_view::npos) {
    throw ConfigError("distance range '" + std::string(text) + "': expected lo-hi");
  }
  DistanceRange r;
  try {
    r.lo = std::stod(std::string(text.substr(0, dash)));
    r.hi = std::stod(std::string(text.substr(dash + 1)));
  } catch (const std::logic_error&) {
    throw ConfigError("distance range '" + std::string(text) + "': not numeric");
  }
  if (!(r.hi > r.lo)) throw ConfigError("distance range '" + std::string(text) + "': hi must exceed lo");
  return r;
}

std::vector<std::size_t> filter_indices(std::span<const double> null_fraction,
                                        std::span<const double> distance_mm, const FilterSpec& f) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < null_fraction.size(); ++i) {
    if (!(null_fraction[i] > f.null_threshold)) keep.push_back(i);
  }
  if (keep.empty() && !null_fraction.empty()) {
    throw ConfigError("filters.null_threshold: every sample has more than " +
                      std::to_string(f.null_threshold) + " null pixels");
  }
  if (f.range) {
    std::erase_if(keep, [&](std::size_t i) { return !f.range->contains(distance_mm[i]); });
    if (keep.empty()) {
      throw ConfigError("filters.distance_range: no sample lies in " + f.range->label() + " mm");
    }
  }
  return keep;
}

DatasetManifest apply_filters(const DatasetManifest& m, const FilterSpec& f) {
  std::vector<double> nulls, dists;
  for (const auto& r : m.records) {
    nulls.push_back(r.null_fraction);
    dists.push_back(r.distance_mm);
  }
  DatasetManifest out;
  out.root = m.root;
  out.class_names = m.class_names;
  for (auto i : filter_indices(nulls, dists, f)) out.records.push_back(m.records[i]);
  return out;
}

Dataset apply_filters(const Dataset& d, const FilterSpec& f) {
  const auto keep = filter_indices(d.null_fraction, d.distance_mm, f);
  return d.subset(keep);
}

std::string to_string(SplitKind k) {
  switch (k) {
    case SplitKind::group1: return "group1";
    case SplitKind::group2_by_instance: return "group2-by-instance";
    case SplitKind::group2_fixed_count: return "group2-fixed-count";
  }
  return "?";
}

SplitKind parse_split_kind(std::string_view name) {
  for (auto k : {SplitKind::group1, SplitKind::group2_by_instance, SplitKind::group2_fixed_count}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("split.kind: unknown policy '" + std::string(name) +
                    "' (group1, group2-by-instance, group2-fixed-count)");
}

SplitIndices make_split_indices(std::span<const int> labels, std::span<const std::string> instances,
                                const SplitPolicy& p) {
  const std::size_t n = labels.size();
  if (instances.size() != n) throw ShapeError("make_splits: instance count mismatch");
  SplitIndices s;
  if (p.kind == SplitKind::group1) {
    s.adapt.resize(n);
    std::iota(s.adapt.begin(), s.adapt.end(), std::size_t{0});
    s.test = s.adapt;
    return s;
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[labels[i]].push_back(i);
  std::vector<bool> is_test(n, false);
  if (p.kind == SplitKind::group2_by_instance) {
    for (const auto& [label, idx] : by_class) {
      std::set<std::string> names;
      for (auto i : idx) names.insert(instances[i]);
      if (names.size() < 2) {
        throw ConfigError("split: class " + std::to_string(label) +
                          " has fewer than 2 instances; group2-by-instance is infeasible");
      }
      if (p.index >= names.size()) {
        throw ConfigError("split.index: " + std::to_string(p.index) + " but class " + std::to_string(label) +
                          " has only " + std::to_string(names.size()) + " instances");
      }
      const std::string held = *std::next(names.begin(), static_cast<long>(p.index));
      for (auto i : idx) is_test[i] = instances[i] == held;
    }
  } else {
    for (const auto& [label, idx] : by_class) {
      if (idx.size() <= p.test_per_class) {
        throw ConfigError("split.test_per_class: class " + std::to_string(label) + " has only " +
                          std::to_string(idx.size()) + " samples");
      }
      auto order = idx;
      Rng rng(derive_seed(p.seed, 1000 + static_cast<std::uint64_t>(label)));
      rng.shuffle(order);
      for (std::size_t k = 0; k < p.test_per_class; ++k) is_test[order[k]] = true;
    }
  }
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? s.test : s.adapt).push_back(i);
  return s;
}

std::pair<Dataset, Dataset> make_splits(const Dataset& target, const SplitPolicy& p) {
  const auto s = make_split_indices(target.y, target.instances, p);
  return {target.subset(s.adapt), target.subset(s.test)};
}

std::pair<DatasetManifest, DatasetManifest> make_splits(const DatasetManifest& target, const SplitPolicy& p) {
  std::vector<int> labels;
  std::vector<std::string> inst;
  for (const auto& r : target.records) {
    labels.push_back(r.label);
    inst.push_back(r.instance);
  }
  const auto s = make_split_indices(labels, inst, p);
  DatasetManifest a{target.root, target.class_names, {}}, t{target.root, target.class_names, {}};
  for (auto i : s.adapt) a.records.push_back(target.records[i]);
  for (auto i : s.test) t.records.push_back(target.records[i]);
  return {std::move(a), std::move(t)};
}

}  // namespace shiftbench::bench

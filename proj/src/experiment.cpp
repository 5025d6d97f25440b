#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shiftbench/adversarial.hpp"
#include "shiftbench/autodial.hpp"
#include "shiftbench/cueint.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"
#include "shiftbench/mkmmd.hpp"

namespace shiftbench::bench {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::source_only: return "source-only";
    case Algorithm::dan: return "dan";
    case Algorithm::dann: return "dann";
    case Algorithm::autodial: return "autodial";
    case Algorithm::adda: return "adda";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  for (auto a : {Algorithm::source_only, Algorithm::dan, Algorithm::dann, Algorithm::autodial, Algorithm::adda}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("algorithm: unknown value '" + std::string(name) +
                    "' (source-only, dan, dann, autodial, adda)");
}

namespace {

std::string method_name(depth::Method m) { return m == depth::Method::sn ? "sn" : "sn++"; }

// Field reader that reports errors by dotted path and rejects unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(where() + "expected an object");
  }
  ~Reader() = default;

  bool has(const char* key) {
    used_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  double number(const char* key, double def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(field(key) + ": expected a number");
    return v.get<double>();
  }

  std::size_t count(const char* key, std::size_t def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      throw ConfigError(field(key) + ": expected a non-negative integer");
    }
    return v.get<std::size_t>();
  }

  bool flag(const char* key, bool def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key) + ": expected true or false");
    return v.get<bool>();
  }

  std::string text(const char* key, const std::string& def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(field(key) + ": expected a string");
    return v.get<std::string>();
  }

  std::vector<std::size_t> counts(const char* key, std::vector<std::size_t> def) {
    if (!has(key)) return def;
    const auto& v = j_.at(key);
    if (!v.is_array()) throw ConfigError(field(key) + ": expected an array of integers");
    std::vector<std::size_t> out;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() <= 0) {
        throw ConfigError(field(key) + ": expected positive integers");
      }
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

  std::vector<double> numbers(const char* key, std::size_t n) {
    const auto& v = j_.at(key);
    if (!v.is_array() || v.size() != n) {
      throw ConfigError(field(key) + ": expected an array of " + std::to_string(n) + " numbers");
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(field(key) + ": expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw ConfigError(field(k.c_str()) + ": unknown field");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class F>
auto with_prefix(const std::string& prefix, F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  }
}

fs::path resolve(const std::string& p, const fs::path& base) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

std::pair<std::size_t, std::size_t> size_pair(Reader& r, const char* key) {
  const auto v = r.numbers(key, 2);
  if (v[0] < 1 || v[1] < 1 || v[0] != std::floor(v[0]) || v[1] != std::floor(v[1])) {
    throw ConfigError(r.field(key) + ": expected two positive integers");
  }
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1])};
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  ExperimentConfig c;
  Reader top(j, "");
  c.name = top.text("name", c.name);
  c.algorithm = parse_algorithm(top.text("algorithm", to_string(c.algorithm)));
  c.modality = parse_modality(top.text("modality", to_string(c.modality)));
  c.train.seed = top.count("seed", c.train.seed);

  if (top.has("data")) {
    Reader d(top.raw("data"), "data");
    c.data.kind = d.text("kind", c.data.kind);
    auto& s = c.data.synth;
    s.kind = parse_synth_kind(d.text("generator", to_string(s.kind)));
    s.n_source = d.count("n_source", s.n_source);
    s.n_target = d.count("n_target", s.n_target);
    s.noise = d.number("noise", s.noise);
    s.rotation_deg = d.number("rotation_deg", s.rotation_deg);
    s.shift = d.number("shift", s.shift);
    s.classes = d.count("classes", s.classes);
    s.dim = d.count("dim", s.dim);
    s.instances = d.count("instances", s.instances);
    s.max_label_noise = d.number("max_label_noise", s.max_label_noise);
    if (d.has("source")) c.data.source = resolve(d.text("source", ""), base_dir);
    if (d.has("target")) c.data.target = resolve(d.text("target", ""), base_dir);
    auto& pp = c.data.preprocess;
    pp.grid = d.count("grid", pp.grid);
    if (d.has("resize")) pp.resize = size_pair(d, "resize");
    if (d.has("crop")) pp.crop = size_pair(d, "crop");
    pp.depth_method = with_prefix("data.depth_method: ", [&] {
      return depth::parse_method(d.text("depth_method", method_name(pp.depth_method)));
    });
    if (d.has("colorize")) {
      Reader z(d.raw("colorize"), "data.colorize");
      auto& cz = pp.colorize;
      cz.window = z.count("window", cz.window);
      cz.max_iter = z.count("max_iter", cz.max_iter);
      cz.sigma_spatial = z.number("sigma_spatial", cz.sigma_spatial);
      cz.sigma_range = z.number("sigma_range", cz.sigma_range);
      cz.amount = z.number("amount", cz.amount);
      cz.radius = z.number("radius", cz.radius);
      cz.depth_gain = z.number("depth_gain", cz.depth_gain);
      z.finish();
    }
    d.finish();
  }
  if (top.has("filters")) {
    Reader f(top.raw("filters"), "filters");
    c.filters.null_threshold = f.number("null_threshold", c.filters.null_threshold);
    if (f.has("distance_range")) {
      const auto v = f.numbers("distance_range", 2);
      c.filters.range = DistanceRange{v[0], v[1]};
    }
    f.finish();
  }
  if (top.has("split")) {
    Reader s(top.raw("split"), "split");
    c.split.kind = parse_split_kind(s.text("kind", to_string(c.split.kind)));
    c.split.index = s.count("index", c.split.index);
    c.split.test_per_class = s.count("test_per_class", c.split.test_per_class);
    c.split.seed = s.count("seed", c.split.seed);
    s.finish();
  }
  if (top.has("network")) {
    Reader n(top.raw("network"), "network");
    c.hidden = n.counts("hidden", c.hidden);
    n.finish();
  }
  if (top.has("train")) {
    Reader t(top.raw("train"), "train");
    auto& lr = c.train.lr;
    lr.policy = with_prefix("train.lr_policy: ", [&] { return parse_lr_policy(t.text("lr_policy", std::string(to_string(lr.policy)))); });
    lr.base_lr = t.number("base_lr", lr.base_lr);
    lr.gamma = t.number("gamma", lr.gamma);
    lr.power = t.number("power", lr.power);
    lr.step_size = t.number("step_size", lr.step_size);
    c.train.momentum = t.number("momentum", c.train.momentum);
    c.train.weight_decay = t.number("weight_decay", c.train.weight_decay);
    c.train.batch_size = t.count("batch_size", c.train.batch_size);
    c.train.epochs = t.count("epochs", c.train.epochs);
    t.finish();
  }
  if (top.has("loss_weights")) {
    Reader w(top.raw("loss_weights"), "loss_weights");
    c.mmd_weight = w.number("mmd", c.mmd_weight);
    c.domain_weight = w.number("domain", c.domain_weight);
    c.entropy_weight = w.number("target_entropy", c.entropy_weight);
    w.finish();
  }
  if (top.has("dan")) {
    Reader r(top.raw("dan"), "dan");
    c.beta_cadence = r.count("beta_cadence", c.beta_cadence);
    c.qp_eps = r.number("qp_eps", c.qp_eps);
    r.finish();
  }
  if (top.has("dann")) {
    Reader r(top.raw("dann"), "dann");
    c.domain_hidden = r.counts("domain_hidden", c.domain_hidden);
    r.finish();
  }
  if (top.has("adda")) {
    Reader r(top.raw("adda"), "adda");
    c.disc_hidden = r.counts("discriminator_hidden", c.disc_hidden);
    c.adda_lr = r.number("lr", c.adda_lr);
    r.finish();
  }
  if (top.has("autodial")) {
    Reader r(top.raw("autodial"), "autodial");
    c.autodial_affine = r.flag("affine", c.autodial_affine);
    if (r.has("pinned_alpha")) c.pinned_alpha = r.number("pinned_alpha", 1.0);
    r.finish();
  }
  if (top.has("rgbd")) {
    Reader r(top.raw("rgbd"), "rgbd");
    if (r.has("cue_weights")) {
      const auto v = r.numbers("cue_weights", 2);
      c.cue_weights = {v[0], v[1]};
    }
    c.svm_c = r.number("svm_c", c.svm_c);
    c.svm_epochs = r.count("svm_epochs", c.svm_epochs);
    r.finish();
  }
  top.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

void ExperimentConfig::validate() const {
  with_prefix("train.", [&] { train.validate(); });
  if (data.kind == "synthetic") {
    data.synth.validate();
    if (modality == Modality::rgbd && data.synth.kind != SynthKind::two_cue) {
      throw ConfigError("modality: rgbd with synthetic data needs data.generator two-cue");
    }
  } else if (data.kind == "csv" || data.kind == "images") {
    for (const auto& [p, key] : {std::pair{&data.source, "data.source"}, std::pair{&data.target, "data.target"}}) {
      if (p->empty()) throw ConfigError(std::string(key) + ": required for data.kind " + data.kind);
      if (!fs::exists(*p)) throw ConfigError(std::string(key) + ": no such file or directory: " + p->string());
    }
    if (data.kind == "csv" && modality == Modality::rgbd) {
      throw ConfigError("modality: rgbd needs data.kind images or the synthetic two-cue generator");
    }
    if (data.kind == "images") with_prefix("data.colorize.", [&] { data.preprocess.colorize.validate(); });
  } else {
    throw ConfigError("data.kind: unknown value '" + data.kind + "' (synthetic, csv, images)");
  }
  if (!(filters.null_threshold >= 0.0 && filters.null_threshold <= 1.0)) {
    throw ConfigError("filters.null_threshold: must lie in [0, 1]");
  }
  if (filters.range && !(filters.range->hi > filters.range->lo)) {
    throw ConfigError("filters.distance_range: hi must exceed lo");
  }
  if (split.kind == SplitKind::group2_fixed_count && split.test_per_class == 0) {
    throw ConfigError("split.test_per_class: must be positive");
  }
  if ((algorithm == Algorithm::dann || algorithm == Algorithm::adda || algorithm == Algorithm::autodial) &&
      hidden.empty()) {
    throw ConfigError("network.hidden: " + to_string(algorithm) + " needs at least one hidden layer");
  }
  if (!(mmd_weight >= 0.0)) throw ConfigError("loss_weights.mmd: must be >= 0");
  if (!(domain_weight >= 0.0)) throw ConfigError("loss_weights.domain: must be >= 0");
  if (!(entropy_weight >= 0.0)) throw ConfigError("loss_weights.target_entropy: must be >= 0");
  if (!(qp_eps > 0.0)) throw ConfigError("dan.qp_eps: must be positive");
  if (!(adda_lr > 0.0)) throw ConfigError("adda.lr: must be positive");
  if (pinned_alpha && !(*pinned_alpha >= 0.5 && *pinned_alpha <= 1.0)) {
    throw ConfigError("autodial.pinned_alpha: must lie in [0.5, 1]");
  }
  if (!(svm_c > 0.0)) throw ConfigError("rgbd.svm_c: must be positive");
  if (svm_epochs == 0) throw ConfigError("rgbd.svm_epochs: must be positive");
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["algorithm"] = to_string(c.algorithm);
  j["modality"] = to_string(c.modality);
  j["seed"] = c.train.seed;
  json d;
  d["kind"] = c.data.kind;
  if (c.data.kind == "synthetic") {
    const auto& s = c.data.synth;
    d["generator"] = to_string(s.kind);
    d["n_source"] = s.n_source;
    d["n_target"] = s.n_target;
    d["noise"] = s.noise;
    d["rotation_deg"] = s.rotation_deg;
    d["shift"] = s.shift;
    d["classes"] = s.classes;
    d["dim"] = s.dim;
    d["instances"] = s.instances;
    d["max_label_noise"] = s.max_label_noise;
  } else {
    d["source"] = c.data.source.generic_string();
    d["target"] = c.data.target.generic_string();
  }
  if (c.data.kind == "images") {
    const auto& pp = c.data.preprocess;
    d["grid"] = pp.grid;
    if (pp.resize) d["resize"] = {pp.resize->first, pp.resize->second};
    if (pp.crop) d["crop"] = {pp.crop->first, pp.crop->second};
    d["depth_method"] = method_name(pp.depth_method);
    const auto& z = pp.colorize;
    d["colorize"] = {{"window", z.window},          {"max_iter", z.max_iter}, {"sigma_spatial", z.sigma_spatial},
                     {"sigma_range", z.sigma_range}, {"amount", z.amount},     {"radius", z.radius},
                     {"depth_gain", z.depth_gain}};
  }
  j["data"] = d;
  json f;
  f["null_threshold"] = c.filters.null_threshold;
  if (c.filters.range) f["distance_range"] = {c.filters.range->lo, c.filters.range->hi};
  j["filters"] = f;
  j["split"] = {{"kind", to_string(c.split.kind)},
                {"index", c.split.index},
                {"test_per_class", c.split.test_per_class},
                {"seed", c.split.seed}};
  j["network"] = {{"hidden", c.hidden}};
  const auto& lr = c.train.lr;
  j["train"] = {{"lr_policy", std::string(to_string(lr.policy))},
                {"base_lr", lr.base_lr},
                {"gamma", lr.gamma},
                {"power", lr.power},
                {"step_size", lr.step_size},
                {"momentum", c.train.momentum},
                {"weight_decay", c.train.weight_decay},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs}};
  j["loss_weights"] = {{"mmd", c.mmd_weight}, {"domain", c.domain_weight}, {"target_entropy", c.entropy_weight}};
  j["dan"] = {{"beta_cadence", c.beta_cadence}, {"qp_eps", c.qp_eps}};
  j["dann"] = {{"domain_hidden", c.domain_hidden}};
  j["adda"] = {{"discriminator_hidden", c.disc_hidden}, {"lr", c.adda_lr}};
  j["autodial"] = {{"affine", c.autodial_affine}};
  if (c.pinned_alpha) j["autodial"]["pinned_alpha"] = *c.pinned_alpha;
  j["rgbd"] = {{"cue_weights", {c.cue_weights[0], c.cue_weights[1]}},
               {"svm_c", c.svm_c},
               {"svm_epochs", c.svm_epochs}};
  return j.dump(2);
}

std::string fingerprint(const ExperimentConfig& cfg) {
  const std::string canon = json::parse(config_to_json(cfg)).dump();
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(canon.data(), canon.size());
  return os.str();
}

namespace {

void rename_ids(Dataset& d, char prefix) {
  for (auto& id : d.ids) id[0] = prefix;
}

std::string setting_name(const ExperimentConfig& c) {
  std::ostringstream os;
  if (c.data.kind == "synthetic") {
    const auto& s = c.data.synth;
    os << to_string(s.kind);
    if (s.kind == SynthKind::moons_rotate || s.kind == SynthKind::moons_distance_noise) {
      os << '-' << s.rotation_deg;
    } else {
      os << '-' << s.shift;
    }
  } else {
    os << c.data.source.filename().string() << "->" << c.data.target.filename().string();
  }
  os << '/' << to_string(c.modality) << '/' << to_string(c.split.kind);
  if (c.split.kind != SplitKind::group1) os << '#' << c.split.index;
  return os.str();
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset src, tgt, src_d, tgt_d;
  const bool two = cfg.modality == Modality::rgbd;
  const std::uint64_t seed = cfg.train.seed;
  if (cfg.data.kind == "synthetic") {
    const auto& s = cfg.data.synth;
    if (s.kind == SynthKind::two_cue) {
      auto a = synth_two_cue(s.n_source, s.noise, 0.0, derive_seed(seed, 53));
      auto b = synth_two_cue(s.n_target, s.noise, s.shift, derive_seed(seed, 54));
      rename_ids(b.first, 't');
      rename_ids(b.second, 't');
      const bool depth_only = cfg.modality == Modality::depth;
      src = depth_only ? a.second : a.first;
      tgt = depth_only ? b.second : b.first;
      src_d = std::move(a.second);
      tgt_d = std::move(b.second);
    } else {
      auto pair = synth_shift_dataset(s, seed);
      src = std::move(pair.source);
      tgt = std::move(pair.target);
    }
  } else if (cfg.data.kind == "csv") {
    src = read_dataset_csv(cfg.data.source);
    tgt = read_dataset_csv(cfg.data.target);
  } else {
    const auto ms = ingest(cfg.data.source);
    const auto mt = ingest(cfg.data.target);
    if (ms.class_names != mt.class_names) {
      throw ConfigError("data: source and target class directories differ");
    }
    const Modality primary = cfg.modality == Modality::depth ? Modality::depth : Modality::rgb;
    src = load_image_dataset(ms, primary, cfg.data.preprocess);
    tgt = load_image_dataset(mt, primary, cfg.data.preprocess);
    if (two) {
      src_d = load_image_dataset(ms, Modality::depth, cfg.data.preprocess);
      tgt_d = load_image_dataset(mt, Modality::depth, cfg.data.preprocess);
    }
  }
  if (src.dim() != tgt.dim()) {
    throw ConfigError("data: source has " + std::to_string(src.dim()) + " features, target " +
                      std::to_string(tgt.dim()));
  }
  const std::size_t classes = std::max(src.num_classes, tgt.num_classes);
  for (auto* d : {&src, &tgt, &src_d, &tgt_d}) d->num_classes = classes;

  // The null-pixel rule concerns depth frames; the distance range only
  // selects target test material.
  const bool uses_depth = cfg.modality != Modality::rgb;
  FilterSpec src_filter{uses_depth ? cfg.filters.null_threshold : 1.0, std::nullopt};
  FilterSpec tgt_filter{src_filter.null_threshold, cfg.filters.range};
  const auto ks = filter_indices(src.null_fraction, src.distance_mm, src_filter);
  const auto kt = filter_indices(tgt.null_fraction, tgt.distance_mm, tgt_filter);
  src = src.subset(ks);
  tgt = tgt.subset(kt);
  if (two) {
    src_d = src_d.subset(ks);
    tgt_d = tgt_d.subset(kt);
  }
  const auto split = make_split_indices(tgt.y, tgt.instances, cfg.split);
  if (split.test.empty() || split.adapt.empty()) throw ConfigError("split: produced an empty set");
  PreparedData p;
  p.adapt = tgt.subset(split.adapt);
  p.test = tgt.subset(split.test);
  p.source = std::move(src);
  if (two) {
    p.adapt_depth = tgt_d.subset(split.adapt);
    p.test_depth = tgt_d.subset(split.test);
    p.source_depth = std::move(src_d);
  }
  return p;
}

Model train_algorithm(const ExperimentConfig& cfg, Algorithm algo, const Dataset& source,
                      const Dataset& adapt, const Dataset& monitor, MetricsLog* log) {
  const std::size_t in = source.dim(), classes = source.num_classes;
  const std::uint64_t seed = cfg.train.seed;
  auto keep = [&](MetricsLog l) {
    if (log) *log = std::move(l);
  };
  autodial::AutodialConfig acfg;
  acfg.lambda = cfg.entropy_weight;
  acfg.affine = cfg.autodial_affine;
  acfg.pinned_alpha = cfg.pinned_alpha;
  const Model base = make_model(mlp(Role::classifier, in, cfg.hidden, classes), seed);
  const std::size_t attach = base.spec.layers.size() - 1;

  switch (algo) {
    case Algorithm::source_only: {
      // AutoDIAL is compared against the same network with plain batchnorm.
      Model m = cfg.algorithm == Algorithm::autodial
                    ? make_model(autodial::batchnorm_network(in, cfg.hidden, classes, acfg), seed)
                    : base;
      auto r = train_source_only(std::move(m), source, monitor, cfg.train);
      keep(std::move(r.log));
      return std::move(r.model);
    }
    case Algorithm::dan: {
      mmd::DanConfig d;
      d.adapted_layers = mmd::default_adapted_layers(base.spec);
      d.lambda = cfg.mmd_weight;
      d.beta_cadence = cfg.beta_cadence;
      d.qp_eps = cfg.qp_eps;
      auto r = mmd::dan_train(base, source, adapt, d, cfg.train);
      keep(std::move(r.log));
      return std::move(r.model);
    }
    case Algorithm::dann: {
      adv::DannConfig d;
      d.attach = attach;
      d.domain_hidden = cfg.domain_hidden;
      d.lambda_d = cfg.domain_weight;
      auto r = adv::dann_train(adv::make_dann(base, d, seed), source, adapt, d, cfg.train);
      keep(std::move(r.log));
      return adv::dann_classifier(r.model);
    }
    case Algorithm::autodial: {
      auto r = autodial::autodial_train(
          make_model(autodial::autodial_network(in, cfg.hidden, classes, acfg), seed), source, adapt, acfg,
          cfg.train);
      keep(std::move(r.log));
      return std::move(r.model);
    }
    case Algorithm::adda: {
      adv::AddaConfig a;
      a.split = attach;
      a.disc_hidden = cfg.disc_hidden;
      auto st = adv::make_adda(base, a, seed);
      adv::adda_pretrain(st, source, monitor, cfg.train);
      TrainConfig tc = cfg.train;
      tc.lr = LrSchedule{LrPolicy::fixed, cfg.adda_lr, 0.0, 0.0, 1.0};
      auto r = adv::adda_adapt(st, source, adapt, tc, tc);
      MetricsLog l = std::move(r.log);
      keep(std::move(l));
      return compose_models(st.mt, st.c, Role::classifier);
    }
  }
  throw ConfigError("unknown algorithm");
}

namespace {

struct Scores {
  double source = 0.0, target = 0.0;
  std::optional<cue::RgbdResult> rgbd;
};

Scores train_and_score(const ExperimentConfig& cfg, Algorithm algo, const PreparedData& p, MetricsLog* log,
                       MetricsLog* log_depth) {
  Scores s;
  const Model m = train_algorithm(cfg, algo, p.source, p.adapt, p.test, log);
  s.source = evaluate_accuracy(m, p.source, Domain::source);
  s.target = evaluate_accuracy(m, p.test, Domain::target);
  if (cfg.modality == Modality::rgbd) {
    const Model md = train_algorithm(cfg, algo, p.source_depth, p.adapt_depth, p.test_depth, log_depth);
    cue::RgbdConfig rc;
    rc.cue_weights = cfg.cue_weights;
    rc.svm = {cfg.svm_c, cfg.svm_epochs};
    rc.max_null_fraction = cfg.filters.null_threshold;
    s.rgbd = cue::rgbd_pipeline(m, md, p.source, p.source_depth, p.test, p.test_depth, rc);
    s.target = s.rgbd->combined_accuracy;
  }
  return s;
}

void add_scores(ResultTable& t, const std::string& fp, const std::string& prefix, const Scores& s) {
  t.add(fp, prefix + "source_accuracy", s.source);
  t.add(fp, prefix + "target_accuracy", s.target);
  if (s.rgbd) {
    t.add(fp, prefix + "rgb_svm_accuracy", s.rgbd->rgb_accuracy);
    t.add(fp, prefix + "depth_svm_accuracy", s.rgbd->depth_accuracy);
  }
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
  const std::string fp = fingerprint(cfg);
  ExperimentOutcome out;
  auto& t = out.table;
  t.add(fp, "meta.name", cfg.name);
  t.add(fp, "meta.algorithm", to_string(cfg.algorithm));
  t.add(fp, "meta.setting", setting_name(cfg));
  t.add(fp, "meta.seed", std::to_string(cfg.train.seed));
  const PreparedData p = prepare_data(cfg);
  t.add(fp, "meta.source_samples", std::to_string(p.source.size()));
  t.add(fp, "meta.test_samples", std::to_string(p.test.size()));

  std::optional<Scores> base, algo;
  try {
    MetricsLog l, ld;
    base = train_and_score(cfg, Algorithm::source_only, p, &l, &ld);
    out.logs.emplace_back("baseline", std::move(l));
    if (cfg.modality == Modality::rgbd) out.logs.emplace_back("baseline.depth", std::move(ld));
    add_scores(t, fp, "baseline.", *base);
  } catch (const Error& e) {
    out.failed = true;
    t.add(fp, "baseline.status", std::string("failed: ") + e.what());
  }
  if (cfg.algorithm == Algorithm::source_only) {
    algo = base;
  } else {
    try {
      MetricsLog l, ld;
      algo = train_and_score(cfg, cfg.algorithm, p, &l, &ld);
      out.logs.emplace_back(to_string(cfg.algorithm), std::move(l));
      if (cfg.modality == Modality::rgbd) out.logs.emplace_back(to_string(cfg.algorithm) + ".depth", std::move(ld));
    } catch (const Error& e) {
      out.failed = true;
      t.add(fp, "status", std::string("failed: ") + e.what());
    }
  }
  if (algo) {
    add_scores(t, fp, "", *algo);
    if (base) t.add(fp, "margin", algo->target - base->target);
  }
  if (!out.failed) t.add(fp, "status", "ok");
  for (const auto& [name, log] : out.logs) {
    for (const auto& n : log.notes) out.notes.push_back(name + ": " + n);
  }
  return out;
}

std::string describe_plan(const ExperimentConfig& cfg) {
  cfg.validate();
  std::ostringstream os;
  os << "experiment   " << cfg.name << '\n'
     << "fingerprint  " << fingerprint(cfg) << '\n'
     << "algorithm    " << to_string(cfg.algorithm) << " (plus source-only baseline)\n"
     << "modality     " << to_string(cfg.modality) << '\n'
     << "setting      " << setting_name(cfg) << '\n'
     << "data         " << cfg.data.kind;
  if (cfg.data.kind != "synthetic") os << "  " << cfg.data.source.string() << " -> " << cfg.data.target.string();
  os << '\n'
     << "filters      null > " << cfg.filters.null_threshold;
  if (cfg.filters.range) os << ", distance " << cfg.filters.range->label();
  os << '\n'
     << "network      hidden";
  for (auto h : cfg.hidden) os << ' ' << h;
  os << '\n'
     << "training     " << cfg.train.epochs << " epochs, batch " << cfg.train.batch_size << ", lr "
     << to_string(cfg.train.lr.policy) << ' ' << cfg.train.lr.base_lr << ", momentum " << cfg.train.momentum
     << ", seed " << cfg.train.seed << '\n';
  return os.str();
}

ExperimentOutcome sweep_model(const Model& model, const Dataset& test, std::span<const DistanceRange> ranges,
                              const std::string& fp) {
  ExperimentOutcome out;
  const Tensor scores = predict(model.spec, model.params, model.buffers, test.x, Domain::target);
  const auto pred = argmax_rows(scores);
  for (const auto& r : ranges) {
    std::size_t n = 0, right = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      if (!r.contains(test.distance_mm[i])) continue;
      ++n;
      right += pred[i] == test.y[i] ? 1 : 0;
    }
    if (n == 0) {
      out.notes.push_back("range " + r.label() + " mm holds no test samples; skipped");
      continue;
    }
    out.table.add(fp, "count" + r.label(), static_cast<double>(n));
    out.table.add(fp, "correct" + r.label(), static_cast<double>(right));
    out.table.add(fp, "accuracy" + r.label(), static_cast<double>(right) / static_cast<double>(n));
  }
  return out;
}

ExperimentOutcome distance_sweep(const ExperimentConfig& cfg, std::span<const DistanceRange> ranges) {
  if (cfg.modality == Modality::rgbd) throw ConfigError("modality: distance sweeps run on a single modality");
  if (ranges.empty()) throw ConfigError("sweep: no distance ranges given");
  ExperimentConfig c = cfg;
  c.filters.range.reset();
  const std::string fp = fingerprint(c);
  const PreparedData p = prepare_data(c);
  MetricsLog log;
  const Model m = train_algorithm(c, c.algorithm, p.source, p.adapt, p.test, &log);
  auto out = sweep_model(m, p.test, ranges, fp);
  out.table.rows.insert(out.table.rows.begin(), {{fp, "meta.algorithm", to_string(c.algorithm)},
                                                 {fp, "meta.setting", setting_name(c)}});
  out.logs.emplace_back(to_string(c.algorithm), std::move(log));
  return out;
}

}  // namespace shiftbench::bench

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shiftbench/depthcolor.hpp"
#include "shiftbench/training.hpp"

namespace shiftbench::bench {

// ---------------------------------------------------------------- synthetic

enum class SynthKind { moons_rotate, blobs_shift, moons_distance_noise, two_cue };

std::string to_string(SynthKind kind);
SynthKind parse_synth_kind(std::string_view name);

struct SynthParams {
  SynthKind kind = SynthKind::moons_rotate;
  std::size_t n_source = 600;
  std::size_t n_target = 600;
  double noise = 0.1;           // Gaussian jitter on the moons, blob std-dev for blobs
  double rotation_deg = 30.0;   // moons: target rotated about the data centroid
  double shift = 2.0;           // blobs: target translated along (1, 1, ...)/sqrt(d)
  std::size_t classes = 2;      // blobs only; moons are always two classes
  std::size_t dim = 2;          // blobs only
  std::size_t instances = 3;    // instance ids per class, round robin
  double max_label_noise = 0.4; // moons_distance_noise: flip rate at the far end

  void validate() const;
};

struct DomainPair {
  Dataset source, target;
};

/// Source and target drawn from one generator; only the stated shift
/// differs. Metadata: ids "s<i>"/"t<i>", instances "c<label>-i<k>",
/// distance_mm in [500, 2500) (used by moons_distance_noise, where target
/// labels flip with probability growing linearly in distance). two_cue
/// returns the "rgb" cue of synth_two_cue.
DomainPair synth_shift_dataset(const SynthParams& params, std::uint64_t seed);

/// Two-cue task for cue integration. Four classes; cue "rgb" separates the
/// class pairs {0,1} vs {2,3} but not the classes within a pair, cue "depth"
/// separates {0,2} vs {1,3}. Returns (rgb, depth) for one domain; both share
/// ids and labels. `shift` translates both cues.
std::pair<Dataset, Dataset> synth_two_cue(std::size_t n, double noise, double shift, std::uint64_t seed);

/// Dataset CSV: id,label,instance,distance_mm,null_fraction,f0,f1,...
void write_dataset_csv(std::ostream& os, const Dataset& d);
void write_dataset_csv(const std::filesystem::path& path, const Dataset& d);
Dataset read_dataset_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------- ingestion

struct Record {
  std::string id;
  int label = 0;
  std::string instance;
  std::filesystem::path rgb;    // empty when absent
  std::filesystem::path depth;  // empty when absent
  double distance_mm = 0.0;     // median valid depth
  double null_fraction = 0.0;
};

struct DatasetManifest {
  std::filesystem::path root;
  std::vector<std::string> class_names;
  std::vector<Record> records;

  void validate() const;
};

/// Walks root/<class>/<instance>/<frame>.(ppm|pgm). A frame stem with both
/// files gives one record with both modalities. root/manifest.csv, when
/// present, overrides distance_mm and null_fraction by id
/// (columns id,distance_mm,null_fraction).
DatasetManifest ingest(const std::filesystem::path& root);

void write_manifest_csv(std::ostream& os, const DatasetManifest& m);

enum class Modality { rgb, depth, rgbd };
std::string to_string(Modality m);
Modality parse_modality(std::string_view name);

struct PreprocessOptions {
  std::optional<std::pair<std::size_t, std::size_t>> resize;  // (w, h), bilinear
  std::optional<std::pair<std::size_t, std::size_t>> crop;    // centered
  std::size_t grid = 16;                                      // final features: grid x grid x 3
  depth::Method depth_method = depth::Method::sn_plus;
  depth::SnPlusConfig colorize;
};

/// Features for one modality (rgb or depth). Depth frames are colorized
/// first. Each image is resized/cropped per the options, resampled to the
/// grid and scaled to [0, 1].
Dataset load_image_dataset(const DatasetManifest& m, Modality modality, const PreprocessOptions& opt);

/// Bilinear resampling of an RGB image.
depth::ColorImage resize_bilinear(const depth::ColorImage& img, std::size_t w, std::size_t h);
depth::ColorImage center_crop(const depth::ColorImage& img, std::size_t w, std::size_t h);

// ---------------------------------------------------------------- protocol

struct DistanceRange {
  double lo = 0.0, hi = 0.0;  // half-open [lo, hi) in mm
  bool contains(double d) const { return d >= lo && d < hi; }
  std::string label() const;
};

DistanceRange parse_range(std::string_view text);  // "lo-hi"

struct FilterSpec {
  double null_threshold = 0.75;  // drop when null_fraction > threshold
  std::optional<DistanceRange> range;
};

/// Indices that survive the filters. Throws ConfigError naming the filter
/// that emptied the set.
std::vector<std::size_t> filter_indices(std::span<const double> null_fraction,
                                        std::span<const double> distance_mm, const FilterSpec& f);
DatasetManifest apply_filters(const DatasetManifest& m, const FilterSpec& f);
Dataset apply_filters(const Dataset& d, const FilterSpec& f);

enum class SplitKind { group1, group2_by_instance, group2_fixed_count };
std::string to_string(SplitKind k);
SplitKind parse_split_kind(std::string_view name);

struct SplitPolicy {
  SplitKind kind = SplitKind::group1;
  std::size_t index = 0;           // held-out instance (by sorted name) for by-instance
  std::size_t test_per_class = 60; // fixed-count
  std::uint64_t seed = 7;
};

struct SplitIndices {
  std::vector<std::size_t> adapt, test;
};

SplitIndices make_split_indices(std::span<const int> labels, std::span<const std::string> instances,
                                const SplitPolicy& p);
std::pair<Dataset, Dataset> make_splits(const Dataset& target, const SplitPolicy& p);
std::pair<DatasetManifest, DatasetManifest> make_splits(const DatasetManifest& target, const SplitPolicy& p);

// ---------------------------------------------------------------- results

struct ResultRow {
  std::string fingerprint, metric, value;
  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

/// Rows of (config fingerprint, metric, value). Numeric values are written
/// with 17 significant digits so they round-trip.
struct ResultTable {
  std::vector<ResultRow> rows;

  void add(const std::string& fp, const std::string& metric, double value);
  void add(const std::string& fp, const std::string& metric, std::string value);
  std::optional<std::string> find(const std::string& fp, const std::string& metric) const;
  double number(const std::string& fp, const std::string& metric) const;

  void write_csv(std::ostream& os) const;
  void write_csv(const std::filesystem::path& path) const;
  static ResultTable read_csv(const std::filesystem::path& path);
  static ResultTable read_csv(std::istream& is);

  /// Union of rows; identical duplicates collapse, a (fingerprint, metric)
  /// pair with two different values is a ConfigError. Rows come out sorted.
  static ResultTable merge(std::span<const ResultTable> tables);

  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

/// Pivot of merged results: rows = algorithm, columns = setting, cells =
/// target accuracy; the best cell per column is starred. Baseline rows are
/// reported as "source-only".
std::string report_table(const ResultTable& merged);

// ---------------------------------------------------------------- experiments

enum class Algorithm { source_only, dan, dann, autodial, adda };
std::string to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

struct DataSource {
  std::string kind = "synthetic";  // synthetic | csv | images
  SynthParams synth;
  std::filesystem::path source, target;  // csv files or image roots
  PreprocessOptions preprocess;
};

struct ExperimentConfig {
  std::string name = "experiment";
  Algorithm algorithm = Algorithm::source_only;
  Modality modality = Modality::rgb;
  DataSource data;
  FilterSpec filters;
  SplitPolicy split;
  std::vector<std::size_t> hidden{32, 16};
  TrainConfig train;
  // loss weights
  double mmd_weight = 1.0;
  double domain_weight = 0.1;
  double entropy_weight = 0.1;
  // algorithm extras
  std::size_t beta_cadence = 0;
  double qp_eps = 1e-3;
  std::vector<std::size_t> domain_hidden{16};
  std::vector<std::size_t> disc_hidden{64, 128, 192};
  double adda_lr = 0.001;  // fixed rate for both D and M_t
  bool autodial_affine = true;
  std::optional<double> pinned_alpha;
  std::array<double, 2> cue_weights{1.0, 1.0};
  double svm_c = 1.0;
  std::size_t svm_epochs = 50;

  /// Throws ConfigError with the offending field path.
  void validate() const;
};

/// Parses the JSON form; unknown keys and wrong types are ConfigErrors that
/// name the field. Relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over the canonical JSON form.
std::string fingerprint(const ExperimentConfig& cfg);

/// Datasets after filtering and splitting.
struct PreparedData {
  Dataset source, adapt, test;
  Dataset source_depth, adapt_depth, test_depth;  // rgbd only
};
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Trains the configured algorithm on (source, adapt) and returns a single
/// classifier for evaluation on target data.
Model train_algorithm(const ExperimentConfig& cfg, Algorithm algo, const Dataset& source,
                      const Dataset& adapt, const Dataset& monitor, MetricsLog* log = nullptr);

struct ExperimentOutcome {
  ResultTable table;
  bool failed = false;
  std::vector<std::string> notes;
  std::vector<std::pair<std::string, MetricsLog>> logs;  // per trained model
};

/// Baseline plus configured algorithm. Rows (all under the config
/// fingerprint): meta.name, meta.algorithm, meta.setting,
/// baseline.source_accuracy, baseline.target_accuracy, source_accuracy,
/// target_accuracy, margin. A failure becomes a "status" row.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

/// Human-readable plan printed by `run --dry-run`.
std::string describe_plan(const ExperimentConfig& cfg);

/// Accuracy of `model` on each range subset of `test` (rows
/// "accuracy[lo,hi)" and "count[lo,hi)"); empty subsets are skipped with a
/// note.
ExperimentOutcome sweep_model(const Model& model, const Dataset& test, std::span<const DistanceRange> ranges,
                              const std::string& fp);
/// Trains once per the config, then sweeps the target test set.
ExperimentOutcome distance_sweep(const ExperimentConfig& cfg, std::span<const DistanceRange> ranges);

}  // namespace shiftbench::bench

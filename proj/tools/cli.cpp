#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "shiftbench/depthcolor.hpp"
#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"
#include "shiftbench/mkmmd.hpp"

namespace shiftbench::cli {

namespace fs = std::filesystem;

namespace {

std::optional<std::uint64_t> seed_override() {
  const char* v = std::getenv("SHIFTBENCH_SEED");
  if (v == nullptr || *v == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto s = std::stoull(v, &used);
    if (used != std::string_view(v).size()) throw std::invalid_argument(v);
    return s;
  } catch (const std::logic_error&) {
    throw ConfigError(std::string("SHIFTBENCH_SEED: not an unsigned integer: '") + v + "'");
  }
}

bench::ExperimentConfig load_with_seed(const fs::path& path) {
  auto cfg = bench::load_config(path);
  if (const auto s = seed_override()) {
    cfg.train.seed = *s;
    cfg.split.seed = *s;
  }
  return cfg;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

// Dataset CSV (id,label,... header) or a bare numeric matrix separated by
// commas or whitespace; a non-numeric first line is taken as a header.
Tensor load_matrix(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  std::string first;
  std::getline(f, first);
  if (first.rfind("id,label,", 0) == 0) return bench::read_dataset_csv(path).x;
  f.seekg(0);
  std::vector<double> values;
  std::size_t rows = 0, cols = 0, lineno = 0;
  std::string line;
  while (std::getline(f, line)) {
    ++lineno;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    bool numeric = true;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) numeric = false;
      } catch (const std::logic_error&) {
        numeric = false;
      }
    }
    if (row.empty() && numeric) continue;
    if (!numeric) {
      if (lineno == 1) continue;
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": non-numeric value");
    }
    if (cols == 0) cols = row.size();
    if (row.size() != cols) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                    " values, got " + std::to_string(row.size()));
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw IoError(path.string() + ": no rows");
  return Tensor({rows, cols}, std::move(values));
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + num(v[i]);
  return s;
}

// ---------------------------------------------------------------- commands

struct ColorizeArgs {
  std::string method = "sn++";
  fs::path in, out;
  depth::SnPlusConfig cfg;
};

int cmd_colorize(const ColorizeArgs& a, std::ostream& out) {
  const auto method = depth::parse_method(a.method);
  a.cfg.validate();
  if (!fs::is_directory(a.in)) throw ConfigError("--in: not a directory: " + a.in.string());
  std::vector<fs::path> inputs;
  for (const auto& e : fs::directory_iterator(a.in)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") inputs.push_back(e.path());
  }
  std::sort(inputs.begin(), inputs.end());
  if (inputs.empty()) throw ConfigError("--in: no .pgm files in " + a.in.string());
  ensure_dir(a.out);
  for (const auto& p : inputs) {
    const auto img = depth::read_pgm(p);
    const fs::path dst = a.out / p.filename().replace_extension(".ppm");
    depth::write_ppm(dst, depth::colorize(img, method, a.cfg));
    out << p.filename().string() << " -> " << dst.string() << " (" << img.width << 'x' << img.height << ", "
        << img.null_count() << " null)\n";
  }
  return 0;
}

struct SynthArgs {
  std::string generator = "moons-rotate";
  bench::SynthParams params;
  std::uint64_t seed = 7;
  fs::path out = ".";
};

int cmd_synth(SynthArgs a, std::ostream& out) {
  a.params.kind = bench::parse_synth_kind(a.generator);
  if (const auto s = seed_override()) a.seed = *s;
  ensure_dir(a.out);
  const auto pair = bench::synth_shift_dataset(a.params, a.seed);
  bench::write_dataset_csv(a.out / "source.csv", pair.source);
  bench::write_dataset_csv(a.out / "target.csv", pair.target);
  out << "wrote " << (a.out / "source.csv").string() << " (" << pair.source.size() << " rows)\n"
      << "wrote " << (a.out / "target.csv").string() << " (" << pair.target.size() << " rows)\n";
  if (a.params.kind == bench::SynthKind::two_cue) {
    // same streams as the experiment harness, depth cue
    auto s = bench::synth_two_cue(a.params.n_source, a.params.noise, 0.0, derive_seed(a.seed, 53)).second;
    auto t = bench::synth_two_cue(a.params.n_target, a.params.noise, a.params.shift, derive_seed(a.seed, 54)).second;
    for (auto& id : t.ids) id[0] = 't';
    bench::write_dataset_csv(a.out / "source_depth.csv", s);
    bench::write_dataset_csv(a.out / "target_depth.csv", t);
    out << "wrote " << (a.out / "source_depth.csv").string() << ", " << (a.out / "target_depth.csv").string()
        << '\n';
  }
  return 0;
}

int cmd_ingest(const fs::path& root, const std::optional<fs::path>& dst, std::ostream& out) {
  const auto m = bench::ingest(root);
  if (dst) {
    std::ofstream f(*dst);
    if (!f) throw IoError("cannot write " + dst->string());
    bench::write_manifest_csv(f, m);
    out << m.records.size() << " records, " << m.class_names.size() << " classes -> " << dst->string() << '\n';
  } else {
    bench::write_manifest_csv(out, m);
  }
  return 0;
}

void write_logs(const fs::path& dir, const std::string& fp, const bench::ExperimentOutcome& o) {
  for (const auto& [name, log] : o.logs) {
    std::ofstream f(dir / (fp + "." + name + ".csv"));
    if (!f) throw IoError("cannot write log under " + dir.string());
    log.write_csv(f);
  }
}

int cmd_run(const std::vector<fs::path>& configs, const fs::path& dir, bool dry_run, std::ostream& out,
            std::ostream& err) {
  std::vector<bench::ExperimentConfig> cfgs;
  for (const auto& p : configs) {
    try {
      cfgs.push_back(load_with_seed(p));
      cfgs.back().validate();
    } catch (const ConfigError& e) {
      throw ConfigError(p.string() + ": " + e.what());
    }
  }
  if (dry_run) {
    for (const auto& c : cfgs) out << bench::describe_plan(c) << '\n';
    return 0;
  }
  ensure_dir(dir / "logs");
  std::vector<bench::ResultTable> tables;
  bool failed = false;
  for (const auto& c : cfgs) {
    const auto fp = bench::fingerprint(c);
    out << "running " << c.name << " [" << fp << "]\n";
    auto o = bench::run_experiment(c);
    for (const auto& n : o.notes) err << c.name << ": " << n << '\n';
    if (o.failed) {
      failed = true;
      for (const auto& r : o.table.rows) {
        if (r.metric.ends_with("status")) err << c.name << ": " << r.value << '\n';
      }
    }
    write_logs(dir / "logs", fp, o);
    tables.push_back(std::move(o.table));
  }
  const auto merged = bench::ResultTable::merge(tables);
  merged.write_csv(dir / "results.csv");
  const auto report = bench::report_table(merged);
  std::ofstream(dir / "report.txt") << report;
  out << '\n' << report << "results: " << (dir / "results.csv").string() << '\n';
  return failed ? 1 : 0;
}

int cmd_sweep(const fs::path& config, const std::string& ranges_text, const fs::path& dir, std::ostream& out,
              std::ostream& err) {
  const auto cfg = load_with_seed(config);
  std::vector<bench::DistanceRange> ranges;
  std::istringstream ss(ranges_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) ranges.push_back(bench::parse_range(item));
  }
  auto o = bench::distance_sweep(cfg, ranges);
  for (const auto& n : o.notes) err << n << '\n';
  ensure_dir(dir);
  o.table.write_csv(dir / "sweep.csv");
  const auto fp = o.table.rows.front().fingerprint;
  write_logs(dir, fp, o);
  out << "range            count  accuracy\n";
  for (const auto& r : ranges) {
    const auto acc = o.table.find(fp, "accuracy" + r.label());
    if (!acc) continue;
    char line[96];
    std::snprintf(line, sizeof line, "%-15s  %5s  %.4f\n", r.label().c_str(),
                  o.table.find(fp, "count" + r.label())->c_str(), std::stod(*acc));
    out << line;
  }
  return 0;
}

struct MmdArgs {
  fs::path source, target;
  std::vector<double> multipliers{std::begin(mmd::kDefaultMultipliers), std::end(mmd::kDefaultMultipliers)};
  std::size_t max_rows = 200;
  double qp_eps = 1e-3;
};

int cmd_mmd(const MmdArgs& a, std::ostream& out) {
  const Tensor s = load_matrix(a.source);
  const Tensor t = load_matrix(a.target);
  if (s.cols() != t.cols()) {
    throw ShapeError("dimension mismatch: source has " + std::to_string(s.cols()) + " columns, target " +
                     std::to_string(t.cols()));
  }
  const auto bank = mmd::median_heuristic_bank(s, t, a.multipliers, a.max_rows);
  const auto lin = mmd::mmd_linear(bank, s, t);
  const double quad = mmd::mmd_quadratic_oracle(bank, s, t);
  out << "kernels    " << bank.size() << " (gamma " << join(bank.gammas) << ")\n"
      << "linear     " << num(lin.value) << "  (" << lin.used << " samples per side)\n"
      << "quadratic  " << num(quad) << '\n';
  const std::size_t tuples = lin.g_values.cols();
  if (tuples < 2) {
    out << "beta       " << join(bank.betas) << "  (too few tuples for the variance estimate)\n";
    return 0;
  }
  std::vector<double> d(bank.size(), 0.0);
  for (std::size_t u = 0; u < bank.size(); ++u) {
    for (std::size_t i = 0; i < tuples; ++i) d[u] += lin.g_values(u, i);
    d[u] /= static_cast<double>(tuples);
  }
  const auto qp = mmd::beta_qp(d, mmd::variance_q(lin.g_values), a.qp_eps);
  out << "beta       " << join(qp.bank_beta) << (qp.fallback ? "  (no kernel with positive estimate; uniform)" : "")
      << '\n';
  return 0;
}

int cmd_report(const std::vector<fs::path>& files, const std::optional<fs::path>& dst, std::ostream& out) {
  std::vector<bench::ResultTable> tables;
  for (const auto& f : files) tables.push_back(bench::ResultTable::read_csv(f));
  const auto merged = bench::ResultTable::merge(tables);
  if (dst) merged.write_csv(*dst);
  out << bench::report_table(merged);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"shiftbench: domain adaptation toolkit"};
  app.name("shiftbench");
  app.require_subcommand(1, 1);

  ColorizeArgs col;
  auto* c = app.add_subcommand("colorize", "Colorize every .pgm depth frame in a directory into .ppm");
  c->add_option("--method", col.method, "sn or sn++")->check(CLI::IsMember({"sn", "sn++"}))->capture_default_str();
  c->add_option("--in", col.in, "Input directory")->required();
  c->add_option("--out", col.out, "Output directory")->required();
  std::vector<CLI::Option*> plus_only{
      c->add_option("--window", col.cfg.window, "Median fill window (odd)")->capture_default_str(),
      c->add_option("--max-iter", col.cfg.max_iter, "Median fill passes")->capture_default_str(),
      c->add_option("--sigma-s", col.cfg.sigma_spatial, "Bilateral spatial sigma")->capture_default_str(),
      c->add_option("--sigma-r", col.cfg.sigma_range, "Bilateral range sigma")->capture_default_str(),
      c->add_option("--amount", col.cfg.amount, "Unsharp amount")->capture_default_str(),
      c->add_option("--radius", col.cfg.radius, "Unsharp radius")->capture_default_str()};
  c->add_option("--depth-gain", col.cfg.depth_gain, "Depth scale before gradients (0 = max(w,h))")
      ->capture_default_str();

  SynthArgs syn;
  auto* s = app.add_subcommand("synth", "Write a synthetic source/target pair as dataset CSVs");
  s->add_option("--generator", syn.generator, "moons-rotate, blobs-shift, moons-distance-noise, two-cue")
      ->capture_default_str();
  s->add_option("--n-source", syn.params.n_source)->capture_default_str();
  s->add_option("--n-target", syn.params.n_target)->capture_default_str();
  s->add_option("--noise", syn.params.noise)->capture_default_str();
  s->add_option("--rotation", syn.params.rotation_deg, "Target rotation in degrees (moons)")->capture_default_str();
  s->add_option("--shift", syn.params.shift, "Target translation (blobs, two-cue)")->capture_default_str();
  s->add_option("--classes", syn.params.classes)->capture_default_str();
  s->add_option("--dim", syn.params.dim)->capture_default_str();
  s->add_option("--instances", syn.params.instances)->capture_default_str();
  s->add_option("--max-label-noise", syn.params.max_label_noise)->capture_default_str();
  s->add_option("--seed", syn.seed)->capture_default_str();
  s->add_option("--out", syn.out, "Output directory")->capture_default_str();

  fs::path ingest_root;
  std::optional<fs::path> ingest_out;
  auto* g = app.add_subcommand("ingest", "Scan an image tree and print its manifest");
  g->add_option("--root", ingest_root, "Dataset root (class/instance/frame.ppm|pgm)")->required();
  g->add_option("--out", ingest_out, "Manifest CSV (default: stdout)");

  std::vector<fs::path> run_configs;
  fs::path run_out = "results";
  bool dry_run = false;
  auto* r = app.add_subcommand("run", "Run experiments from JSON configs");
  r->add_option("--config,configs", run_configs, "Experiment config files")->required()->check(CLI::ExistingFile);
  r->add_option("--out", run_out, "Output directory")->capture_default_str();
  r->add_flag("--dry-run", dry_run, "Validate and print the plan without training");

  fs::path sweep_config, sweep_out = "results";
  std::string sweep_ranges;
  auto* w = app.add_subcommand("sweep", "Accuracy per target distance range");
  w->add_option("--config", sweep_config)->required()->check(CLI::ExistingFile);
  w->add_option("--ranges", sweep_ranges, "Comma separated lo-hi ranges in mm")->required();
  w->add_option("--out", sweep_out, "Output directory")->capture_default_str();

  MmdArgs mm;
  auto* m = app.add_subcommand("mmd", "MK-MMD between two sample files");
  m->add_option("--source", mm.source)->required()->check(CLI::ExistingFile);
  m->add_option("--target", mm.target)->required()->check(CLI::ExistingFile);
  m->add_option("--multipliers", mm.multipliers, "Bandwidth multipliers on the median heuristic")
      ->delimiter(',')
      ->capture_default_str();
  m->add_option("--max-rows", mm.max_rows, "Rows per side for the median heuristic")->capture_default_str();
  m->add_option("--qp-eps", mm.qp_eps, "Ridge on the variance matrix")->capture_default_str();

  std::vector<fs::path> report_files;
  std::optional<fs::path> report_out;
  auto* p = app.add_subcommand("report", "Merge result CSVs into a comparison table");
  p->add_option("files", report_files, "Result CSVs")->required()->check(CLI::ExistingFile);
  p->add_option("--out", report_out, "Write the merged CSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c->parsed()) {
      if (col.method == "sn") {
        for (const auto* o : plus_only) {
          if (o->count() > 0) {
            err << "colorize: " << o->get_name() << " only applies to --method sn++\n";
            return 2;
          }
        }
      }
      return cmd_colorize(col, out);
    }
    if (s->parsed()) return cmd_synth(syn, out);
    if (g->parsed()) return cmd_ingest(ingest_root, ingest_out, out);
    if (r->parsed()) return cmd_run(run_configs, run_out, dry_run, out, err);
    if (w->parsed()) return cmd_sweep(sweep_config, sweep_ranges, sweep_out, out, err);
    if (m->parsed()) return cmd_mmd(mm, out);
    if (p->parsed()) return cmd_report(report_files, report_out, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace shiftbench::cli

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "shiftbench/error.hpp"
#include "shiftbench/harness.hpp"

namespace shiftbench::bench {

namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> parse_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  out.push_back(std::move(cell));
  return out;
}

}  // namespace

void ResultTable::add(const std::string& fp, const std::string& metric, double value) {
  rows.push_back({fp, metric, format_number(value)});
}

void ResultTable::add(const std::string& fp, const std::string& metric, std::string value) {
  rows.push_back({fp, metric, std::move(value)});
}

std::optional<std::string> ResultTable::find(const std::string& fp, const std::string& metric) const {
  for (const auto& r : rows) {
    if (r.fingerprint == fp && r.metric == metric) return r.value;
  }
  return std::nullopt;
}

double ResultTable::number(const std::string& fp, const std::string& metric) const {
  const auto v = find(fp, metric);
  if (!v) throw ConfigError("result table has no " + metric + " for " + fp);
  return std::stod(*v);
}

void ResultTable::write_csv(std::ostream& os) const {
  os << "fingerprint,metric,value\n";
  for (const auto& r : rows) os << r.fingerprint << ',' << quote(r.metric) << ',' << quote(r.value) << '\n';
}

void ResultTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  write_csv(f);
}

ResultTable ResultTable::read_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "fingerprint,metric,value") {
    throw IoError("results CSV must start with the header fingerprint,metric,value");
  }
  ResultTable t;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto cells = parse_csv_line(line);
    if (cells.size() != 3) throw IoError("results CSV row with " + std::to_string(cells.size()) + " fields: " + line);
    t.rows.push_back({cells[0], cells[1], cells[2]});
  }
  return t;
}

ResultTable ResultTable::read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path.string());
  try {
    return read_csv(f);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

ResultTable ResultTable::merge(std::span<const ResultTable> tables) {
  std::map<std::pair<std::string, std::string>, std::string> cells;
  for (const auto& t : tables) {
    for (const auto& r : t.rows) {
      auto [it, fresh] = cells.try_emplace({r.fingerprint, r.metric}, r.value);
      if (!fresh && it->second != r.value) {
        throw ConfigError("conflicting results for fingerprint " + r.fingerprint + ", metric " + r.metric +
                          ": '" + it->second + "' vs '" + r.value + "'");
      }
    }
  }
  ResultTable out;
  for (const auto& [key, value] : cells) out.rows.push_back({key.first, key.second, value});
  return out;
}

std::string report_table(const ResultTable& merged) {
  // (algorithm, setting) -> accuracies
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  std::set<std::string> fps;
  for (const auto& r : merged.rows) fps.insert(r.fingerprint);
  for (const auto& fp : fps) {
    const auto algo = merged.find(fp, "meta.algorithm");
    const auto setting = merged.find(fp, "meta.setting");
    if (!algo || !setting) continue;
    if (const auto acc = merged.find(fp, "target_accuracy")) cells[{*algo, *setting}].push_back(std::stod(*acc));
    if (*algo != "source-only") {
      if (const auto base = merged.find(fp, "baseline.target_accuracy")) {
        cells[{"source-only", *setting}].push_back(std::stod(*base));
      }
    }
  }
  if (cells.empty()) return "(no accuracy rows)\n";
  std::set<std::string> algos, settings;
  std::map<std::pair<std::string, std::string>, double> mean;
  for (const auto& [key, v] : cells) {
    algos.insert(key.first);
    settings.insert(key.second);
    double s = 0.0;
    for (double x : v) s += x;
    mean[key] = s / static_cast<double>(v.size());
  }
  std::map<std::string, double> best;
  for (const auto& [key, v] : mean) {
    auto it = best.find(key.second);
    if (it == best.end() || v > it->second) best[key.second] = v;
  }
  std::size_t w0 = std::string("algorithm").size();
  for (const auto& a : algos) w0 = std::max(w0, a.size());
  std::vector<std::size_t> widths;
  for (const auto& s : settings) widths.push_back(std::max<std::size_t>(s.size(), 7));

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w0)) << "algorithm";
  std::size_t k = 0;
  for (const auto& s : settings) os << "  " << std::setw(static_cast<int>(widths[k++])) << s;
  os << '\n';
  for (const auto& a : algos) {
    os << std::left << std::setw(static_cast<int>(w0)) << a;
    k = 0;
    for (const auto& s : settings) {
      std::string cell = "-";
      if (auto it = mean.find({a, s}); it != mean.end()) {
        std::ostringstream c;
        c << std::fixed << std::setprecision(4) << it->second;
        cell = c.str() + (it->second == best[s] ? "*" : "");
      }
      os << "  " << std::setw(static_cast<int>(widths[k++])) << cell;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace shiftbench::bench

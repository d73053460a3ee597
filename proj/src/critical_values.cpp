#include "snseg/critical_values.hpp"

#include "parallel.hpp"
#include "snseg/functionals.hpp"
#include "snseg/rng.hpp"
#include "snseg/scan.hpp"
#include "snseg/segmentation.hpp"

#include <json.hpp>
#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace snseg {

namespace {

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::string_view context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::invalid_argument("bad number '" + std::string(s) + "' in key '" + std::string(context) + "'");
  }
  return v;
}

constexpr double kTable[2][10] = {
    {141.9, 208.2, 275.0, 344.4, 415.9, 492.5, 568.4, 651.4, 740.3, 823.5},
    {165.5, 237.5, 309.1, 387.5, 464.5, 541.7, 624.1, 713.3, 808.6, 898.9},
};

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::nested:
      return "nested";
    case Family::single_cp:
      return "single_cp";
    case Family::local:
      return "local";
  }
  return {};
}

Family parse_family(std::string_view text) {
  for (Family f : {Family::nested, Family::single_cp, Family::local}) {
    if (text == to_string(f)) return f;
  }
  throw std::invalid_argument("unknown critical-value family '" + std::string(text) + "'");
}

std::string CriticalValueKey::canonical() const {
  return to_string(family) + "/" + shortest(epsilon) + "/" + std::to_string(d) + "/" + shortest(level);
}

CriticalValueKey CriticalValueKey::parse(std::string_view text) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '/') {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  if (parts.size() != 4) throw std::invalid_argument("malformed critical-value key '" + std::string(text) + "'");
  CriticalValueKey key;
  key.family = parse_family(parts[0]);
  key.epsilon = parse_double(parts[1], text);
  int d = 0;
  auto [ptr, ec] = std::from_chars(parts[2].data(), parts[2].data() + parts[2].size(), d);
  if (ec != std::errc() || ptr != parts[2].data() + parts[2].size() || d < 1) {
    throw std::invalid_argument("bad dimension in key '" + std::string(text) + "'");
  }
  key.d = d;
  key.level = parse_double(parts[3], text);
  return key;
}

CriticalValueNotFound::CriticalValueNotFound(const CriticalValueKey& key)
    : std::runtime_error("no critical value for " + key.canonical()), key_(key) {}

CriticalValueTable CriticalValueTable::builtin() {
  CriticalValueTable t;
  for (int row = 0; row < 2; ++row) {
    for (int d = 1; d <= 10; ++d) {
      t.insert({CriticalValueKey{Family::nested, 0.05, d, row == 0 ? 0.9 : 0.95}, kTable[row][d - 1], Provenance{}});
    }
  }
  return t;
}

void CriticalValueTable::insert(const CriticalValueEntry& entry) {
  if (!(entry.threshold > 0.0) || !std::isfinite(entry.threshold)) {
    throw std::invalid_argument("threshold for " + entry.key.canonical() + " must be positive and finite");
  }
  const std::string name = entry.key.canonical();
  for (const auto& [other_name, other] : entries_) {
    if (other_name == name) continue;
    const auto& k = other.key;
    if (k.family != entry.key.family || k.d != entry.key.d || k.epsilon != entry.key.epsilon) continue;
    const bool broken = (k.level < entry.key.level && other.threshold > entry.threshold) ||
                        (k.level > entry.key.level && other.threshold < entry.threshold);
    if (broken) {
      throw std::invalid_argument("threshold for " + name + " is not monotone in level against " + other_name);
    }
  }
  entries_[name] = entry;
}

const CriticalValueEntry* CriticalValueTable::find(const CriticalValueKey& key) const {
  const auto it = entries_.find(key.canonical());
  return it == entries_.end() ? nullptr : &it->second;
}

double CriticalValueTable::lookup(const CriticalValueKey& key) const {
  if (const auto* e = find(key)) return e->threshold;
  throw CriticalValueNotFound(key);
}

void CriticalValueTable::merge(const CriticalValueTable& other) {
  for (const auto& [name, entry] : other.entries_) insert(entry);
}

bool operator==(const CriticalValueTable& a, const CriticalValueTable& b) {
  if (a.entries_.size() != b.entries_.size()) return false;
  for (const auto& [name, e] : a.entries_) {
    const auto it = b.entries_.find(name);
    if (it == b.entries_.end()) return false;
    if (it->second.threshold != e.threshold || !(it->second.provenance == e.provenance)) return false;
  }
  return true;
}

std::string serialize_table(const CriticalValueTable& table) {
  nlohmann::ordered_json doc;
  doc["format"] = "snseg-critical-values/1";
  nlohmann::ordered_json entries = nlohmann::ordered_json::object();
  for (const auto& [name, e] : table.entries()) {
    nlohmann::ordered_json prov;
    prov["source"] = e.provenance.source;
    if (e.provenance.source == "simulated") {
      prov["n_sim"] = e.provenance.n_sim;
      prov["reps"] = e.provenance.reps;
      prov["seed"] = e.provenance.seed;
    }
    entries[name] = {{"threshold", e.threshold}, {"provenance", prov}};
  }
  doc["entries"] = std::move(entries);
  return doc.dump(2) + "\n";
}

CriticalValueTable parse_table(std::string_view text) {
  using json = nlohmann::json;
  std::vector<std::set<std::string>> seen;
  auto guard = [&seen](int, json::parse_event_t event, json& parsed) {
    switch (event) {
      case json::parse_event_t::object_start:
        seen.emplace_back();
        break;
      case json::parse_event_t::object_end:
        seen.pop_back();
        break;
      case json::parse_event_t::key: {
        const auto name = parsed.get<std::string>();
        if (!seen.back().insert(name).second) throw std::runtime_error("duplicate key '" + name + "' in critical-value file");
        break;
      }
      default:
        break;
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(text.begin(), text.end(), guard);
  } catch (const json::exception& ex) {
    throw std::runtime_error(std::string("critical-value file: ") + ex.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_object()) {
    throw std::runtime_error("critical-value file lacks an 'entries' object");
  }
  CriticalValueTable table;
  for (const auto& [name, value] : doc["entries"].items()) {
    try {
      CriticalValueEntry e;
      e.key = CriticalValueKey::parse(name);
      if (e.key.canonical() != name) throw std::invalid_argument("key is not in canonical form " + e.key.canonical());
      e.threshold = value.at("threshold").get<double>();
      const auto& prov = value.at("provenance");
      e.provenance.source = prov.at("source").get<std::string>();
      if (e.provenance.source == "simulated") {
        e.provenance.n_sim = prov.at("n_sim").get<int>();
        e.provenance.reps = prov.at("reps").get<int>();
        e.provenance.seed = prov.at("seed").get<std::uint64_t>();
      } else if (e.provenance.source != "builtin") {
        throw std::invalid_argument("unknown provenance source '" + e.provenance.source + "'");
      }
      table.insert(e);
    } catch (const std::exception& ex) {
      throw std::runtime_error("critical-value entry '" + name + "': " + ex.what());
    }
  }
  return table;
}

void save_table(const CriticalValueTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_table(table);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

CriticalValueTable load_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_table(ss.str());
  } catch (const std::exception& ex) {
    throw std::runtime_error(path.string() + ": " + ex.what());
  }
}

std::filesystem::path default_cache_path() {
  const std::filesystem::path file = "critical_values.json";
  if (const char* dir = std::getenv("SNSEG_CACHE_DIR"); dir && *dir) return std::filesystem::path(dir) / file;
  if (const char* xdg = std::getenv("XDG_CACHE_HOME"); xdg && *xdg) return std::filesystem::path(xdg) / "snseg" / file;
  if (const char* home = std::getenv("HOME"); home && *home) return std::filesystem::path(home) / ".cache" / "snseg" / file;
  return std::filesystem::path(".snseg") / file;
}

CriticalValueTable load_with_cache(const std::filesystem::path& cache) {
  CriticalValueTable table = CriticalValueTable::builtin();
  if (!cache.empty() && std::filesystem::exists(cache)) table.merge(load_table(cache));
  return table;
}

void append_to_cache(const std::filesystem::path& cache, const CriticalValueEntry& entry) {
  CriticalValueTable table;
  if (std::filesystem::exists(cache)) table = load_table(cache);
  table.insert(entry);
  if (cache.has_parent_path()) std::filesystem::create_directories(cache.parent_path());
  const auto tmp = std::filesystem::path(cache.string() + ".tmp." + std::to_string(::getpid()));
  save_table(table, tmp);
  std::filesystem::rename(tmp, cache);
}

double null_statistic(Family family, const TimeSeries& series, double epsilon, int threads) {
  const Estimator est(series, FunctionalSpec::mean());
  const int h = window_size(series.n(), epsilon);
  switch (family) {
    case Family::nested:
      return NestedScan(est, h, threads).global_max();
    case Family::single_cp:
      return std::max(0.0, profile_max(single_cp_profile(est, 1, series.n(), threads), 1).T);
    case Family::local: {
      const auto T = local_profile(est, h, threads);
      return *std::max_element(T.begin(), T.end());
    }
  }
  return 0.0;
}

std::vector<double> simulate_null_statistics(Family family, double epsilon, int d, int n_sim, int reps,
                                             std::uint64_t seed, int threads) {
  if (window_size(n_sim, epsilon) < 2) throw std::invalid_argument("n_sim * epsilon must be at least 2");
  std::vector<double> out(reps);
  const int nt = detail::resolve_threads(threads);
#pragma omp parallel for schedule(dynamic, 4) num_threads(nt) if (nt > 1)
  for (int r = 0; r < reps; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Eigen::MatrixXd x(n_sim, d);
    for (int t = 0; t < n_sim; ++t) {
      for (int c = 0; c < d; ++c) x(t, c) = rng.normal();
    }
    out[r] = null_statistic(family, TimeSeries(std::move(x)), epsilon, 1);
  }
  return out;
}

double empirical_quantile(std::vector<double> values, double level) {
  if (values.empty()) throw std::invalid_argument("empirical quantile of an empty sample");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("level must lie in (0,1)");
  const int reps = static_cast<int>(values.size());
  const int r = std::clamp(static_cast<int>(std::ceil(level * reps - 1e-9)), 1, reps);
  std::nth_element(values.begin(), values.begin() + (r - 1), values.end());
  return values[r - 1];
}

double simulate(double epsilon, int d, double level, Family family, int n_sim, int reps, std::uint64_t seed,
                int threads) {
  if (n_sim < 500) throw std::invalid_argument("critical-value simulation needs n_sim >= 500");
  if (reps < 1000) throw std::invalid_argument("critical-value simulation needs reps >= 1000");
  if (d < 1) throw std::invalid_argument("dimension must be positive");
  return empirical_quantile(simulate_null_statistics(family, epsilon, d, n_sim, reps, seed, threads), level);
}

}  // namespace snseg

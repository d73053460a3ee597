#pragma once

#include "snseg/core_types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace snseg {

// nested: max_k T_{1,n}(k) over the window grid; single_cp: max_k T_n(1,k,n); local: max_k T'(k).
enum class Family { nested, single_cp, local };

std::string to_string(Family f);
Family parse_family(std::string_view text);

struct CriticalValueKey {
  Family family = Family::nested;
  double epsilon = 0.05;
  int d = 1;
  double level = 0.9;

  // "family/epsilon/d/level" with shortest round-trip decimals, e.g. "nested/0.05/1/0.9".
  std::string canonical() const;
  static CriticalValueKey parse(std::string_view text);
};

struct Provenance {
  std::string source = "builtin";  // builtin | simulated
  int n_sim = 0;
  int reps = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct CriticalValueEntry {
  CriticalValueKey key;
  double threshold = 0.0;
  Provenance provenance;
};

class CriticalValueNotFound : public std::runtime_error {
 public:
  explicit CriticalValueNotFound(const CriticalValueKey& key);
  const CriticalValueKey& key() const { return key_; }

 private:
  CriticalValueKey key_;
};

class CriticalValueTable {
 public:
  // The 20 nested-family values at epsilon = 0.05, d = 1..10, levels 0.90 and 0.95.
  static CriticalValueTable builtin();

  // Replaces any entry with the same key. Throws std::invalid_argument for a non-positive threshold
  // or when the entry breaks monotonicity in level for its (family, epsilon, d).
  void insert(const CriticalValueEntry& entry);
  const CriticalValueEntry* find(const CriticalValueKey& key) const;
  double lookup(const CriticalValueKey& key) const;
  double lookup(double epsilon, int d, double level, Family family) const {
    return lookup(CriticalValueKey{family, epsilon, d, level});
  }
  void merge(const CriticalValueTable& other);

  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, CriticalValueEntry>& entries() const { return entries_; }

  friend bool operator==(const CriticalValueTable& a, const CriticalValueTable& b);

 private:
  std::map<std::string, CriticalValueEntry> entries_;
};

void save_table(const CriticalValueTable& table, const std::filesystem::path& path);
// Throws std::runtime_error naming the offending key for duplicates or malformed entries.
CriticalValueTable load_table(const std::filesystem::path& path);
CriticalValueTable parse_table(std::string_view text);
std::string serialize_table(const CriticalValueTable& table);

// $SNSEG_CACHE_DIR/critical_values.json, else $XDG_CACHE_HOME/snseg/..., else ~/.cache/snseg/...
std::filesystem::path default_cache_path();
// Builtin entries overlaid with the cache file when it exists.
CriticalValueTable load_with_cache(const std::filesystem::path& cache);
// Merges the entry into the cache file through a temporary file and rename.
void append_to_cache(const std::filesystem::path& cache, const CriticalValueEntry& entry);

// Null statistic of one series under the given family.
double null_statistic(Family family, const TimeSeries& series, double epsilon, int threads = 1);
// One value per replication in replication order; replication r uses seed derive_seed(seed, r).
std::vector<double> simulate_null_statistics(Family family, double epsilon, int d, int n_sim, int reps,
                                             std::uint64_t seed, int threads = 0);
// ceil(level * reps)-th order statistic of the simulated null values.
double simulate(double epsilon, int d, double level, Family family, int n_sim, int reps, std::uint64_t seed,
                int threads = 0);
double empirical_quantile(std::vector<double> values, double level);

}  // namespace snseg

#pragma once

#include "snseg/critical_values.hpp"
#include "snseg/segmentation.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace snseg::cli {

using Json = nlohmann::ordered_json;

// Operational failure reported to the user with exit code 1.
class CommandError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ThresholdOptions {
  double level = 0.9;
  std::optional<double> threshold;
  std::string cache;  // empty: default_cache_path()
  bool auto_simulate = false;
  int sim_n = 2000;
  int sim_reps = 5000;
  std::uint64_t sim_seed = 1;
};

struct DetectOptions {
  std::string input;
  bool header = false;
  std::string functional = "mean";
  std::string method = "sncp";
  double epsilon = 0.05;
  ThresholdOptions thresholds;
  bool refine = false;
  std::optional<int> trim;
  bool attribute = false;
  int wbs_intervals = 1000;
  double sbs_decay = 0.0;  // 0: (1/2)^(1/4)
  std::uint64_t seed = 0;
  bool trace = false;
};

struct CritvalOptions {
  std::string family = "nested";
  double epsilon = 0.05;
  int d = 1;
  double level = 0.9;
  int n_sim = 2000;
  int reps = 5000;
  std::uint64_t seed = 1;
  std::string cache;
};

struct SimulateOptions {
  std::string preset = "M1";
  std::uint64_t seed = 0;
  std::string output;
};

struct BenchmarkOptions {
  std::string preset = "M1";
  std::vector<std::string> methods{"sncp"};
  std::string functional = "mean";
  double epsilon = 0.05;
  ThresholdOptions thresholds;
  int reps = 100;
  std::uint64_t seed = 0;
  bool refine = false;
  int wbs_intervals = 1000;
  double sbs_decay = 0.0;
  bool timing = false;
  bool replications = false;
  std::string output_prefix;
};

Json cmd_detect(const DetectOptions& opt, int jobs);
Json cmd_critval_lookup(const CritvalOptions& opt);
Json cmd_critval_simulate(const CritvalOptions& opt, int jobs);
// Builtin table overlaid with the cache; written to `output` when non-empty.
Json cmd_critval_export(const CritvalOptions& opt, const std::string& output);
Json cmd_simulate(const SimulateOptions& opt);
// Writes <prefix>.csv and <prefix>.json when a prefix is given; returns the JSON document.
Json cmd_benchmark(const BenchmarkOptions& opt, int jobs);

Family family_for(Method m);

// Full command-line entry point; returns the process exit code.
int run(int argc, char** argv);

}  // namespace snseg::cli

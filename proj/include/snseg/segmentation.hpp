#pragma once

#include "snseg/core_types.hpp"
#include "snseg/functionals.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snseg {

enum class Method { sncp, snbs, snlocal, snwbs, snsbs };

std::string to_string(Method m);
Method parse_method(std::string_view text);

struct DetectionConfig {
  double epsilon = 0.05;
  double threshold = 141.9;
  FunctionalSpec functional = FunctionalSpec::mean();
  Method method = Method::sncp;
  int wbs_intervals = 1000;
  double sbs_decay = std::pow(0.5, 0.25);
  std::uint64_t seed = 0;
  bool record_trace = false;
  int threads = 0;
};

struct DetectedPoint {
  int k = 0;
  double statistic = 0.0;
  std::optional<Window> window;
  int s = 0;
  int e = 0;
};

// One recursion call: the scanned segment and its profile T_{s,e}(k), k = s..e.
struct TraceNode {
  int s = 0;
  int e = 0;
  int depth = 0;
  std::vector<double> profile;
  int argmax = -1;
  double max = 0.0;
  bool split = false;
};

struct DetectionResult {
  ChangePointSet changepoints;
  std::vector<DetectedPoint> statistics;
  DetectionConfig config;
  int h = 0;
  std::vector<std::string> notes;
  std::vector<TraceNode> trace;
};

int window_size(int n, double epsilon);

DetectionResult sncp_detect(const TimeSeries& series, const DetectionConfig& config);
DetectionResult snbs_detect(const TimeSeries& series, const DetectionConfig& config);
DetectionResult snlocal_detect(const TimeSeries& series, const DetectionConfig& config);
DetectionResult snwbs_detect(const TimeSeries& series, const DetectionConfig& config);
DetectionResult snsbs_detect(const TimeSeries& series, const DetectionConfig& config);
DetectionResult detect(const TimeSeries& series, const DetectionConfig& config);

// Seeded intervals over [lo, n]: layer k has ceil(len a^k) >= min_length, 2 ceil(a^-k) - 1 evenly shifted copies.
std::vector<Window> seeded_intervals(int lo, int n, double decay, int min_length);
// Random intervals over [lo, n]: length uniform on [min_length, n-lo+1], then start uniform.
std::vector<Window> wbs_intervals(int lo, int n, int count, int min_length, std::uint64_t seed);

namespace reference {
// Algorithm 1 driven by direct per-window summation; slow, kept for testing the scan kernels.
DetectionResult sncp_detect(const TimeSeries& series, const DetectionConfig& config);
}  // namespace reference

}  // namespace snseg

#pragma once

#include "snseg/core_types.hpp"
#include "snseg/critical_values.hpp"
#include "snseg/functionals.hpp"

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

namespace snseg {

struct RefinementConfig {
  int trim = 1;
  FunctionalSpec functional = FunctionalSpec::mean();
};

// ceil(epsilon * n / ln n)
int default_trim(double epsilon, int n);

// sqrt((k-s+1)(e-k)) / (e-s+1) * (theta_{k+1,e} - theta_{s,k}); nullopt when an estimate is degenerate.
std::optional<Eigen::VectorXd> cusum_stat(const Estimator& est, int k, int s, int e);

struct RefinementResult {
  ChangePointSet points;
  // Trimmed local interval [s*, e*] used for each point.
  std::vector<Window> intervals;
  std::vector<std::string> warnings;
};

// Local interval for point i: [k_{i-1} + trim, k_{i+1} - trim] with k_0 = 1 - trim and k_{m+1} = n + trim,
// clamped to the functional's effective range.
std::vector<Window> local_intervals(const ChangePointSet& cps, int trim, int lo);

RefinementResult refine(const TimeSeries& series, const ChangePointSet& cps, const RefinementConfig& config);

struct AttributionItem {
  FunctionalSpec component;
  double statistic = 0.0;
  double threshold = 0.0;
  bool flagged = false;
};

struct Attribution {
  int changepoint = 0;
  Window interval;
  std::vector<AttributionItem> items;
};

// Heuristic per-component single change-point test on each point's trimmed local interval;
// no multiplicity correction. Thresholds come from the single_cp family at (epsilon, d, level).
std::vector<Attribution> attribute_features(const TimeSeries& series, const ChangePointSet& refined_cps,
                                            const std::vector<FunctionalSpec>& components,
                                            const CriticalValueTable& table, double epsilon, double level, int trim);

}  // namespace snseg

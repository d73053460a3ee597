#include "snseg/refinement.hpp"

#include "snseg/scan.hpp"

#include <algorithm>
#include <cmath>

namespace snseg {

int default_trim(double epsilon, int n) {
  return std::max(1, static_cast<int>(std::ceil(epsilon * n / std::log(static_cast<double>(n)) - 1e-12)));
}

std::optional<Eigen::VectorXd> cusum_stat(const Estimator& est, int k, int s, int e) {
  const int d = est.dim();
  Eigen::VectorXd left(d), right(d);
  const bool ok_l = est.estimate(s, k, left.data());
  const bool ok_r = est.estimate(k + 1, e, right.data());
  if (!ok_l || !ok_r) return std::nullopt;
  const double scale = std::sqrt(static_cast<double>(k - s + 1) * (e - k)) / (e - s + 1);
  return Eigen::VectorXd(scale * (right - left));
}

std::vector<Window> local_intervals(const ChangePointSet& cps, int trim, int lo) {
  const auto& k = cps.points();
  const int m = static_cast<int>(k.size());
  const int n = cps.n();
  std::vector<Window> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    const int prev = i == 0 ? 1 - trim : k[i - 1];
    const int next = i == m - 1 ? n + trim : k[i + 1];
    out.push_back({std::max(lo, prev + trim), std::min(n, next - trim)});
  }
  return out;
}

RefinementResult refine(const TimeSeries& series, const ChangePointSet& cps, const RefinementConfig& config) {
  if (config.trim < 1) throw std::invalid_argument("refinement trim must be >= 1");
  RefinementResult result;
  if (cps.empty()) {
    result.points = cps;
    return result;
  }
  const Estimator est(series, config.functional);
  const int trim = config.trim;
  result.intervals = local_intervals(cps, trim, est.first_index());
  const auto& original = cps.points();
  std::vector<int> refined(original);

  for (std::size_t i = 0; i < original.size(); ++i) {
    const auto [s, e] = result.intervals[i];
    const int lo = s + trim;
    const int hi = e - trim;
    if (lo > hi) {
      result.warnings.push_back("point " + std::to_string(original[i]) + ": trimmed interval [" +
                                std::to_string(lo) + "," + std::to_string(hi) + "] is empty; kept unrefined");
      continue;
    }
    double best = -1.0;
    int arg = -1;
    for (int k = lo; k <= hi; ++k) {
      const auto T = cusum_stat(est, k, s, e);
      if (!T) continue;
      const double v = T->squaredNorm();
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    if (arg < 0) {
      result.warnings.push_back("point " + std::to_string(original[i]) + ": no defined contrast; kept unrefined");
      continue;
    }
    refined[i] = arg;
  }

  for (std::size_t i = 0; i + 1 < refined.size();) {
    if (refined[i] < refined[i + 1]) {
      ++i;
      continue;
    }
    result.warnings.push_back("points " + std::to_string(original[i]) + " and " + std::to_string(original[i + 1]) +
                              " crossed after refinement; both kept unrefined");
    refined[i] = original[i];
    refined[i + 1] = original[i + 1];
    i = i > 0 ? i - 1 : 0;
  }
  result.points = ChangePointSet(std::move(refined), cps.n());
  return result;
}

std::vector<Attribution> attribute_features(const TimeSeries& series, const ChangePointSet& refined_cps,
                                            const std::vector<FunctionalSpec>& components,
                                            const CriticalValueTable& table, double epsilon, double level, int trim) {
  std::vector<Attribution> out;
  if (refined_cps.empty()) return out;
  std::vector<Estimator> ests;
  std::vector<double> thresholds;
  for (const auto& spec : components) {
    ests.emplace_back(series, spec);
    thresholds.push_back(table.lookup(epsilon, spec.output_dim(series.p()), level, Family::single_cp));
  }
  const auto intervals = local_intervals(refined_cps, trim, 1);
  for (std::size_t i = 0; i < refined_cps.size(); ++i) {
    Attribution a{refined_cps.points()[i], intervals[i], {}};
    for (std::size_t c = 0; c < components.size(); ++c) {
      const int s = std::max(intervals[i].t1, ests[c].first_index());
      const int e = intervals[i].t2;
      double stat = 0.0;
      if (e - s + 1 >= 2) stat = std::max(0.0, profile_max(single_cp_profile(ests[c], s, e, 1), s).T);
      a.items.push_back({components[c], stat, thresholds[c], stat > thresholds[c]});
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace snseg

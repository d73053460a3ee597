#include "snseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace snseg {

namespace {

std::vector<double> augmented(const ChangePointSet& cps) {
  std::vector<double> out{0.0};
  for (int k : cps.points()) out.push_back(static_cast<double>(k) / cps.n());
  out.push_back(1.0);
  return out;
}

// max over x in from of the distance to the nearest point of to (sorted)
double directed(const std::vector<double>& from, const std::vector<double>& to) {
  double worst = 0.0;
  for (double x : from) {
    const auto it = std::lower_bound(to.begin(), to.end(), x);
    double best = INFINITY;
    if (it != to.end()) best = *it - x;
    if (it != to.begin()) best = std::min(best, x - *std::prev(it));
    worst = std::max(worst, best);
  }
  return worst;
}

std::int64_t choose2(std::int64_t m) { return m * (m - 1) / 2; }

}  // namespace

HausdorffDistances hausdorff(const ChangePointSet& truth, const ChangePointSet& estimate) {
  if (truth.n() != estimate.n()) throw std::invalid_argument("change-point sets refer to different n");
  const auto t = augmented(truth);
  const auto e = augmented(estimate);
  HausdorffDistances out;
  out.d1 = directed(e, t);
  out.d2 = directed(t, e);
  out.dH = std::max(out.d1, out.d2);
  return out;
}

PairCounts pair_counts(const ChangePointSet& a, const ChangePointSet& b) {
  if (a.n() != b.n()) throw std::invalid_argument("change-point sets refer to different n");
  const auto sa = segments_from_changepoints(a);
  const auto sb = segments_from_changepoints(b);
  PairCounts c;
  for (const auto& w : sa) c.rows += choose2(w.t2 - w.t1 + 1);
  for (const auto& w : sb) c.cols += choose2(w.t2 - w.t1 + 1);
  c.total = choose2(a.n());
  // Non-empty cells of the contingency table are the overlaps of two sorted interval lists.
  std::size_t i = 0, j = 0;
  while (i < sa.size() && j < sb.size()) {
    const int lo = std::max(sa[i].t1, sb[j].t1);
    const int hi = std::min(sa[i].t2, sb[j].t2);
    if (hi >= lo) c.both += choose2(hi - lo + 1);
    if (sa[i].t2 < sb[j].t2) {
      ++i;
    } else {
      ++j;
    }
  }
  return c;
}

double ari_from_counts(const PairCounts& c) {
  const double expected = static_cast<double>(c.rows) * static_cast<double>(c.cols) / static_cast<double>(c.total);
  const double max_index = 0.5 * (static_cast<double>(c.rows) + static_cast<double>(c.cols));
  const double denom = max_index - expected;
  if (denom == 0.0) return c.rows == c.cols && c.both == c.rows ? 1.0 : 0.0;
  return (static_cast<double>(c.both) - expected) / denom;
}

double ari(const ChangePointSet& a, const ChangePointSet& b) { return ari_from_counts(pair_counts(a, b)); }

MetricsReport evaluate(const ChangePointSet& truth, const ChangePointSet& estimate) {
  return {hausdorff(truth, estimate), ari(truth, estimate)};
}

}  // namespace snseg

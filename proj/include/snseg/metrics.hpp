#pragma once

#include "snseg/core_types.hpp"

#include <cstdint>

namespace snseg {

struct HausdorffDistances {
  double d1 = 0.0;  // over-segmentation: estimated points far from any true point
  double d2 = 0.0;  // under-segmentation: true points far from any estimated point
  double dH = 0.0;
};

// Relative locations, each set augmented with the boundary points 0 and 1.
HausdorffDistances hausdorff(const ChangePointSet& truth, const ChangePointSet& estimate);

struct PairCounts {
  std::int64_t both = 0;     // sum over contingency cells of C(n_ij, 2)
  std::int64_t rows = 0;     // sum over segments of a of C(a_i, 2)
  std::int64_t cols = 0;     // sum over segments of b of C(b_j, 2)
  std::int64_t total = 0;    // C(n, 2)
};

PairCounts pair_counts(const ChangePointSet& a, const ChangePointSet& b);
double ari_from_counts(const PairCounts& c);
double ari(const ChangePointSet& a, const ChangePointSet& b);

struct MetricsReport {
  HausdorffDistances distances;
  double ari = 1.0;
};

MetricsReport evaluate(const ChangePointSet& truth, const ChangePointSet& estimate);

}  // namespace snseg

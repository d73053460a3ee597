#pragma once

#include "snseg/functionals.hpp"
#include "snseg/sn_statistic.hpp"

#include <cstdint>
#include <vector>

namespace snseg {

// threads: 0 uses the OpenMP default, 1 runs serially.

// theta and packed Lambda for every segment [b - j h + 1, b] with a >= first_index.
class SegmentTable {
 public:
  SegmentTable(const Estimator& est, int h, int threads = 0);

  int h() const { return h_; }
  int max_j(int b) const { return b < lo_ ? 0 : (b - lo_ + 1) / h_; }
  bool valid(int b, int j) const { return valid_[slot(b, j)] != 0; }
  const double* theta(int b, int j) const { return theta_.data() + slot(b, j) * d_; }
  const double* lambda(int b, int j) const { return lambda_.data() + slot(b, j) * dp_; }

 private:
  std::size_t slot(int b, int j) const { return offsets_[b] + static_cast<std::size_t>(j - 1); }

  int n_, h_, lo_, d_, dp_;
  std::vector<std::size_t> offsets_;
  std::vector<double> theta_;
  std::vector<double> lambda_;
  std::vector<char> valid_;
};

// All nested-grid window statistics T_n(k - j1 h + 1, k, k + j2 h) with a 2-D running maximum per k,
// so T_{s,e}(k) is a constant-time lookup for any segment [s,e].
class NestedScan {
 public:
  NestedScan(const Estimator& est, int h, int threads = 0);

  int n() const { return n_; }
  int h() const { return h_; }
  WindowMax query(int k, int s, int e) const;
  // max over k of T_{1,n}(k)
  double global_max() const;

 private:
  struct Cell {
    double T;
    std::int32_t j1, j2;
  };

  int n_, h_, lo_;
  std::vector<int> J1_, J2_;
  std::vector<std::size_t> offsets_;
  std::vector<Cell> cells_;
};

// Full-interval single change-point statistic T_n(s, k, e) for k = s..e-1; invalid windows give -1.
std::vector<double> single_cp_profile(const Estimator& est, int s, int e, int threads = 0);

struct ScanMax {
  double T = 0.0;
  int k = -1;
};
// Largest statistic over the profile, smallest k on ties; k = -1 when every window is invalid.
ScanMax profile_max(const std::vector<double>& profile, int s);

// T'(k) = T_n(k-h+1, k, k+h); entry k-1 of the result, 0 outside the defined range or for invalid windows.
std::vector<double> local_profile(const Estimator& est, int h, int threads = 0);

}  // namespace snseg

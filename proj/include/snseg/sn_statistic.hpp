#pragma once

#include "snseg/core_types.hpp"
#include "snseg/functionals.hpp"

#include <Eigen/Core>

#include <optional>

namespace snseg {

struct SnComponents {
  Eigen::VectorXd D;
  Eigen::MatrixXd L;
  Eigen::MatrixXd R;
  Eigen::MatrixXd V;
  std::optional<double> T;
};

struct Normalizer {
  Eigen::MatrixXd L;
  Eigen::MatrixXd R;
  Eigen::MatrixXd V;
};

struct WindowMax {
  double T = 0.0;
  std::optional<Window> window;
};

// nullopt when either side's estimate is degenerate.
std::optional<Eigen::VectorXd> contrast(const Estimator& est, int t1, int k, int t2);
Normalizer self_normalizer(const Estimator& est, int t1, int k, int t2);
std::optional<double> t_statistic(const Eigen::VectorXd& D, const Eigen::MatrixXd& V);
SnComponents sn_components(const Estimator& est, int t1, int k, int t2);

// Packed-upper-triangle form used by the scan kernels.
std::optional<double> t_statistic_packed(const double* D, const double* V, int d);

// Grid H(k) clipped to [s,e]; scans every window by direct summation.
WindowMax max_window_statistic(const Estimator& est, int k, int s, int e, int h);

// Number of grid steps available on each side of k for window size h over [lo, n].
inline int grid_left(int k, int lo, int h) { return (k - lo + 1) / h; }
inline int grid_right(int k, int n, int h) { return (n - k) / h; }

}  // namespace snseg

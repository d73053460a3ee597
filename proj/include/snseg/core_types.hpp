#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <vector>

namespace snseg {

// n x p observations; row t-1 holds Y_t. Public indices are 1-based.
class TimeSeries {
 public:
  TimeSeries() = default;
  explicit TimeSeries(Eigen::MatrixXd data);

  int n() const { return static_cast<int>(data_.rows()); }
  int p() const { return static_cast<int>(data_.cols()); }
  double operator()(int t, int c) const { return data_(t - 1, c - 1); }
  const Eigen::MatrixXd& data() const { return data_; }

  static TimeSeries univariate(const std::vector<double>& values);

 private:
  Eigen::MatrixXd data_;
};

struct Window {
  int t1 = 0;
  int t2 = 0;

  friend bool operator==(const Window&, const Window&) = default;
};

// Boundaries k with 1 <= k <= n-1; a change at k ends a segment at observation k.
class ChangePointSet {
 public:
  ChangePointSet() = default;
  ChangePointSet(std::vector<int> points, int n);

  const std::vector<int>& points() const { return points_; }
  int n() const { return n_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }

  friend bool operator==(const ChangePointSet&, const ChangePointSet&) = default;

 private:
  std::vector<int> points_;
  int n_ = 0;
};

std::vector<Window> segments_from_changepoints(const ChangePointSet& cps);
ChangePointSet changepoints_from_segments(const std::vector<Window>& segments);
std::vector<double> relative_changepoints(const ChangePointSet& cps);

}  // namespace snseg

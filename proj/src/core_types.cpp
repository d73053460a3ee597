#include "snseg/core_types.hpp"

#include <cmath>
#include <string>

namespace snseg {

TimeSeries::TimeSeries(Eigen::MatrixXd data) : data_(std::move(data)) {
  if (data_.rows() < 2) throw std::invalid_argument("time series needs n >= 2 observations");
  if (data_.cols() < 1) throw std::invalid_argument("time series needs p >= 1 columns");
  for (Eigen::Index c = 0; c < data_.cols(); ++c) {
    for (Eigen::Index r = 0; r < data_.rows(); ++r) {
      if (!std::isfinite(data_(r, c))) {
        throw std::invalid_argument("non-finite entry at t=" + std::to_string(r + 1) +
                                    ", column " + std::to_string(c + 1));
      }
    }
  }
}

TimeSeries TimeSeries::univariate(const std::vector<double>& values) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(values.size()), 1);
  for (std::size_t i = 0; i < values.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = values[i];
  return TimeSeries(std::move(m));
}

ChangePointSet::ChangePointSet(std::vector<int> points, int n) : points_(std::move(points)), n_(n) {
  if (n_ < 2) throw std::invalid_argument("change-point set needs n >= 2");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const int k = points_[i];
    if (k < 1 || k > n_ - 1) {
      throw std::invalid_argument("change-point " + std::to_string(k) + " outside [1, n-1]");
    }
    if (i > 0 && points_[i - 1] >= k) {
      throw std::invalid_argument("change-points must be strictly increasing");
    }
  }
}

std::vector<Window> segments_from_changepoints(const ChangePointSet& cps) {
  std::vector<Window> out;
  out.reserve(cps.size() + 1);
  int start = 1;
  for (int k : cps.points()) {
    out.push_back({start, k});
    start = k + 1;
  }
  out.push_back({start, cps.n()});
  return out;
}

ChangePointSet changepoints_from_segments(const std::vector<Window>& segments) {
  if (segments.empty()) throw std::invalid_argument("empty segmentation");
  std::vector<int> points;
  for (std::size_t i = 0; i + 1 < segments.size(); ++i) points.push_back(segments[i].t2);
  return ChangePointSet(std::move(points), segments.back().t2);
}

std::vector<double> relative_changepoints(const ChangePointSet& cps) {
  std::vector<double> out;
  out.reserve(cps.size());
  for (int k : cps.points()) out.push_back(static_cast<double>(k) / cps.n());
  return out;
}

}  // namespace snseg

#pragma once

#include "snseg/core_types.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace snseg {

enum class FunctionalKind {
  mean,
  variance,
  covariance,
  correlation,
  autocovariance,
  autocorrelation,
  quantile,
  covariance_matrix,
  multi,
};

// Coordinates are 1-based. `i` is the coordinate for single-coordinate kinds.
struct FunctionalSpec {
  FunctionalKind kind = FunctionalKind::mean;
  int i = 1;
  int j = 1;
  int lag = 0;
  double q = 0.5;
  std::vector<FunctionalSpec> parts;

  static FunctionalSpec mean();
  static FunctionalSpec variance(int coord = 1);
  static FunctionalSpec covariance(int a, int b);
  static FunctionalSpec correlation(int a, int b);
  static FunctionalSpec autocovariance(int coord, int lag);
  static FunctionalSpec autocorrelation(int coord, int lag);
  static FunctionalSpec quantile(int coord, double q);
  static FunctionalSpec covariance_matrix();
  static FunctionalSpec multi(std::vector<FunctionalSpec> parts);

  int output_dim(int p) const;
  int embed_offset() const;
  // Throws std::invalid_argument when the functional does not fit a p-dimensional series.
  void validate(int p) const;

  friend bool operator==(const FunctionalSpec&, const FunctionalSpec&) = default;
};

// Canonical text: mean, variance[:c], cov:i,j, cor:i,j, acov:c,l, acor:c,l,
// quantile:c,q, covmat, multi:(spec;spec;...)
FunctionalSpec parse_functional(std::string_view text);
std::string to_string(const FunctionalSpec& spec);

inline int packed_size(int d) { return d * (d + 1) / 2; }
inline int packed_index(int r, int c, int d) { return r * d - r * (r - 1) / 2 + (c - r); }

namespace detail {
struct EstimatorData;
}

// Plug-in subsample estimates theta(F_{a,b}) backed by prefix moments.
// estimate(a, b) needs 1 + offset() <= a <= b <= n().
class Estimator {
 public:
  Estimator(const TimeSeries& series, const FunctionalSpec& spec);
  ~Estimator();
  Estimator(Estimator&&) noexcept;
  Estimator& operator=(Estimator&&) noexcept;

  int n() const;
  int p() const;
  int dim() const;
  int offset() const;
  int first_index() const { return offset() + 1; }
  const FunctionalSpec& spec() const;

  // Writes dim() values; returns false for an undefined (degenerate) estimate.
  bool estimate(int a, int b, double* out) const;
  std::vector<double> estimate(int a, int b) const;

  // Mean functional only: theta_{a,b} and the packed segment normalizer
  // Lambda(a,b) = sum_{i=a}^{b} c_i c_i^T with bridge c_i = S(i)-S(a-1)-(i-a+1)/m (S(b)-S(a-1)).
  bool has_closed_form_normalizer() const;
  void mean_segment(int a, int b, double* theta, double* lambda) const;

  const detail::EstimatorData& data() const { return *data_; }

 private:
  std::unique_ptr<detail::EstimatorData> data_;
};

inline Estimator precompute(const TimeSeries& series, const FunctionalSpec& spec) {
  return Estimator(series, spec);
}

// Estimates over [a, a], [a, a+1], ... produced one step at a time.
class ForwardSweep {
 public:
  ForwardSweep(const Estimator& est, int a);
  ~ForwardSweep();
  // Extends the right end by one; returns false when the estimate is degenerate.
  bool next(double* out);
  int end() const { return b_; }

 private:
  struct Heaps;
  const Estimator& est_;
  int a_;
  int b_;
  std::unique_ptr<Heaps> heaps_;
};

// Estimates over [b, b], [b-1, b], ... produced one step at a time.
class BackwardSweep {
 public:
  BackwardSweep(const Estimator& est, int b);
  ~BackwardSweep();
  bool next(double* out);
  int start() const { return a_; }

 private:
  struct Heaps;
  const Estimator& est_;
  int a_;
  int b_;
  std::unique_ptr<Heaps> heaps_;
};

// theta_{a,b} and packed Lambda(a,b) = sum_{i=a}^{b-1} (i-a+1)^2 (b-i)^2 / m^2 (th_{a,i} - th_{i+1,b})(.)^T.
// Returns false when theta_{a,b} itself is degenerate; lambda is filled either way.
bool segment_normalizer(const Estimator& est, int a, int b, double* theta, double* lambda);

}  // namespace snseg

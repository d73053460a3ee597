#include "snseg/sn_statistic.hpp"

#include <cmath>
#include <limits>
#include <vector>

namespace snseg {

std::optional<Eigen::VectorXd> contrast(const Estimator& est, int t1, int k, int t2) {
  const int d = est.dim();
  Eigen::VectorXd left(d), right(d);
  const bool ok_left = est.estimate(t1, k, left.data());
  const bool ok_right = est.estimate(k + 1, t2, right.data());
  if (!ok_left || !ok_right) return std::nullopt;
  const double N = t2 - t1 + 1;
  const double scale = static_cast<double>(k - t1 + 1) * (t2 - k) / std::pow(N, 1.5);
  return Eigen::VectorXd(scale * (left - right));
}

namespace {

// sum_{i=a}^{b-1} (i-a+1)^2 (b-i)^2 / m^2 (th_{a,i} - th_{i+1,b})(.)^T, evaluated term by term.
Eigen::MatrixXd direct_lambda(const Estimator& est, int a, int b) {
  const int d = est.dim();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd x(d), y(d);
  const double m = b - a + 1;
  for (int i = a; i < b; ++i) {
    if (!est.estimate(a, i, x.data()) || !est.estimate(i + 1, b, y.data())) continue;
    const double u = static_cast<double>(i - a + 1) * (b - i) / m;
    const Eigen::VectorXd diff = x - y;
    out.noalias() += (u * u) * diff * diff.transpose();
  }
  return out;
}

}  // namespace

Normalizer self_normalizer(const Estimator& est, int t1, int k, int t2) {
  const double N = t2 - t1 + 1;
  const double inv = 1.0 / (N * N);
  Normalizer out;
  out.L = direct_lambda(est, t1, k) * inv;
  out.R = direct_lambda(est, k + 1, t2) * inv;
  out.V = out.L + out.R;
  return out;
}

std::optional<double> t_statistic_packed(const double* D, const double* V, int d) {
  thread_local std::vector<double> Lf, piv, y;
  Lf.assign(static_cast<std::size_t>(d) * d, 0.0);
  piv.assign(d, 0.0);
  y.assign(d, 0.0);
  double trace = 0.0;
  for (int r = 0; r < d; ++r) trace += V[packed_index(r, r, d)];
  const double tol = d * std::numeric_limits<double>::epsilon() * trace;
  if (!(trace > 0.0)) return std::nullopt;

  // V = L diag(piv) L^T with unit lower-triangular L; then D^T V^{-1} D = sum y_j^2 / piv_j for L y = D.
  for (int j = 0; j < d; ++j) {
    double djj = V[packed_index(j, j, d)];
    for (int k = 0; k < j; ++k) djj -= Lf[j * d + k] * Lf[j * d + k] * piv[k];
    if (!(djj > tol)) return std::nullopt;
    piv[j] = djj;
    for (int i = j + 1; i < d; ++i) {
      double v = V[packed_index(j, i, d)];
      for (int k = 0; k < j; ++k) v -= Lf[i * d + k] * Lf[j * d + k] * piv[k];
      Lf[i * d + j] = v / djj;
    }
  }
  double T = 0.0;
  for (int i = 0; i < d; ++i) {
    double v = D[i];
    for (int k = 0; k < i; ++k) v -= Lf[i * d + k] * y[k];
    y[i] = v;
    T += v * v / piv[i];
  }
  return T;
}

std::optional<double> t_statistic(const Eigen::VectorXd& D, const Eigen::MatrixXd& V) {
  const int d = static_cast<int>(D.size());
  std::vector<double> packed(packed_size(d));
  for (int r = 0; r < d; ++r) {
    for (int c = r; c < d; ++c) packed[packed_index(r, c, d)] = V(r, c);
  }
  return t_statistic_packed(D.data(), packed.data(), d);
}

SnComponents sn_components(const Estimator& est, int t1, int k, int t2) {
  SnComponents out;
  auto nrm = self_normalizer(est, t1, k, t2);
  out.L = std::move(nrm.L);
  out.R = std::move(nrm.R);
  out.V = std::move(nrm.V);
  if (auto D = contrast(est, t1, k, t2)) {
    out.D = std::move(*D);
    out.T = t_statistic(out.D, out.V);
  } else {
    out.D = Eigen::VectorXd::Zero(est.dim());
  }
  return out;
}

WindowMax max_window_statistic(const Estimator& est, int k, int s, int e, int h) {
  WindowMax best;
  const int lo = est.first_index();
  const int j1max = std::min(grid_left(k, lo, h), (k - s + 1) / h);
  const int j2max = std::min(grid_right(k, est.n(), h), (e - k) / h);
  double best_value = -1.0;
  for (int j1 = 1; j1 <= j1max; ++j1) {
    for (int j2 = 1; j2 <= j2max; ++j2) {
      const int t1 = k - j1 * h + 1;
      const int t2 = k + j2 * h;
      const auto T = sn_components(est, t1, k, t2).T;
      if (T && *T > best_value) {
        best_value = *T;
        best.T = *T;
        best.window = Window{t1, t2};
      }
    }
  }
  return best;
}

}  // namespace snseg

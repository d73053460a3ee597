#include "snseg/scan.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>

namespace snseg {

SegmentTable::SegmentTable(const Estimator& est, int h, int threads)
    : n_(est.n()), h_(h), lo_(est.first_index()), d_(est.dim()), dp_(packed_size(est.dim())) {
  offsets_.assign(n_ + 2, 0);
  for (int b = 0; b <= n_; ++b) offsets_[b + 1] = offsets_[b] + static_cast<std::size_t>(max_j(b));
  const std::size_t total = offsets_[n_ + 1];
  theta_.assign(total * d_, 0.0);
  lambda_.assign(total * dp_, 0.0);
  valid_.assign(total, 0);

  const int nt = detail::resolve_threads(threads);
  const bool closed = est.has_closed_form_normalizer();
  const int first_b = lo_ + h_ - 1;

#pragma omp parallel num_threads(nt) if (nt > 1)
  {
    std::vector<double> back, fwd(d_), diff(d_);
    std::vector<char> back_ok;
#pragma omp for schedule(dynamic, 8)
    for (int b = first_b; b <= n_; ++b) {
      const int J = max_j(b);
      if (closed) {
        for (int j = 1; j <= J; ++j) {
          const std::size_t sl = slot(b, j);
          est.mean_segment(b - j * h_ + 1, b, theta_.data() + sl * d_, lambda_.data() + sl * dp_);
          valid_[sl] = 1;
        }
        continue;
      }
      // back[x - a_min] = theta_{x,b}, shared by every segment ending at b.
      const int a_min = b - J * h_ + 1;
      const int len = b - a_min + 1;
      back.resize(static_cast<std::size_t>(len) * d_);
      back_ok.resize(len);
      BackwardSweep bs(est, b);
      for (int x = b; x >= a_min; --x) {
        back_ok[x - a_min] = bs.next(back.data() + static_cast<std::size_t>(x - a_min) * d_);
      }
      for (int j = 1; j <= J; ++j) {
        const int a = b - j * h_ + 1;
        const std::size_t sl = slot(b, j);
        std::copy_n(back.data() + static_cast<std::size_t>(a - a_min) * d_, d_, theta_.data() + sl * d_);
        valid_[sl] = back_ok[a - a_min];
        double* lam = lambda_.data() + sl * dp_;
        const double m = b - a + 1;
        const double m2 = m * m;
        ForwardSweep fs(est, a);
        for (int i = a; i < b; ++i) {
          const bool f_ok = fs.next(fwd.data());
          if (!f_ok || !back_ok[i + 1 - a_min]) continue;
          const double u = static_cast<double>(i - a + 1) * (b - i);
          const double w = u * u / m2;
          const double* bk = back.data() + static_cast<std::size_t>(i + 1 - a_min) * d_;
          for (int r = 0; r < d_; ++r) diff[r] = fwd[r] - bk[r];
          int idx = 0;
          for (int r = 0; r < d_; ++r) {
            const double wr = w * diff[r];
            for (int c = r; c < d_; ++c, ++idx) lam[idx] += wr * diff[c];
          }
        }
      }
    }
  }
}

namespace {

// Statistic of the window made of left segment (theta_l, lambda_l) of length ml and right segment of length mr.
double combine(const double* theta_l, const double* lambda_l, int ml, const double* theta_r,
               const double* lambda_r, int mr, int d, double* D, double* V) {
  const double N = ml + mr;
  const double scale = static_cast<double>(ml) * mr / (N * std::sqrt(N));
  const double inv = 1.0 / (N * N);
  for (int r = 0; r < d; ++r) D[r] = scale * (theta_l[r] - theta_r[r]);
  const int dp = packed_size(d);
  for (int idx = 0; idx < dp; ++idx) V[idx] = (lambda_l[idx] + lambda_r[idx]) * inv;
  const auto T = t_statistic_packed(D, V, d);
  return T ? *T : -1.0;
}

}  // namespace

NestedScan::NestedScan(const Estimator& est, int h, int threads) : n_(est.n()), h_(h), lo_(est.first_index()) {
  const SegmentTable seg(est, h, threads);
  const int d = est.dim();
  J1_.assign(n_ + 1, 0);
  J2_.assign(n_ + 1, 0);
  offsets_.assign(n_ + 2, 0);
  for (int k = 0; k <= n_; ++k) {
    if (k >= lo_ + h_ - 1 && k <= n_ - h_) {
      J1_[k] = grid_left(k, lo_, h_);
      J2_[k] = grid_right(k, n_, h_);
    }
    offsets_[k + 1] = offsets_[k] + static_cast<std::size_t>(J1_[k]) * J2_[k];
  }
  cells_.resize(offsets_[n_ + 1]);

  const int nt = detail::resolve_threads(threads);
#pragma omp parallel num_threads(nt) if (nt > 1)
  {
    std::vector<double> D(d), V(packed_size(d));
#pragma omp for schedule(dynamic, 8)
    for (int k = lo_ + h_ - 1; k <= n_ - h_; ++k) {
      const int J1 = J1_[k], J2 = J2_[k];
      Cell* cell = cells_.data() + offsets_[k];
      for (int j1 = 1; j1 <= J1; ++j1) {
        for (int j2 = 1; j2 <= J2; ++j2) {
          const int b = k + j2 * h_;
          double T = -1.0;
          if (seg.valid(k, j1) && seg.valid(b, j2)) {
            T = combine(seg.theta(k, j1), seg.lambda(k, j1), j1 * h_, seg.theta(b, j2), seg.lambda(b, j2),
                        j2 * h_, d, D.data(), V.data());
          }
          cell[(j1 - 1) * J2 + (j2 - 1)] = {T, j1, j2};
        }
      }
      // Running maximum over the rectangle [1..j1] x [1..j2]; ties keep the lexicographically smallest (j1,j2).
      auto better = [](const Cell& a, const Cell& b) {
        if (a.T != b.T) return a.T > b.T;
        return a.j1 != b.j1 ? a.j1 < b.j1 : a.j2 < b.j2;
      };
      for (int j1 = 1; j1 <= J1; ++j1) {
        for (int j2 = 1; j2 <= J2; ++j2) {
          Cell& c = cell[(j1 - 1) * J2 + (j2 - 1)];
          if (j1 > 1) {
            const Cell& up = cell[(j1 - 2) * J2 + (j2 - 1)];
            if (better(up, c)) c = up;
          }
          if (j2 > 1) {
            const Cell& left = cell[(j1 - 1) * J2 + (j2 - 2)];
            if (better(left, c)) c = left;
          }
        }
      }
    }
  }
}

WindowMax NestedScan::query(int k, int s, int e) const {
  if (k < 1 || k > n_ || J1_[k] == 0) return {};
  const int j1 = std::min(J1_[k], (k - s + 1) / h_);
  const int j2 = std::min(J2_[k], (e - k) / h_);
  if (j1 < 1 || j2 < 1) return {};
  const Cell& c = cells_[offsets_[k] + static_cast<std::size_t>(j1 - 1) * J2_[k] + (j2 - 1)];
  if (c.T < 0.0) return {};
  return {c.T, Window{k - c.j1 * h_ + 1, k + c.j2 * h_}};
}

double NestedScan::global_max() const {
  double best = 0.0;
  for (int k = 1; k <= n_; ++k) {
    if (J1_[k] == 0) continue;
    best = std::max(best, cells_[offsets_[k] + static_cast<std::size_t>(J1_[k]) * J2_[k] - 1].T);
  }
  return best;
}

std::vector<double> single_cp_profile(const Estimator& est, int s, int e, int threads) {
  const int d = est.dim();
  const int dp = packed_size(d);
  std::vector<double> out(std::max(0, e - s), -1.0);
  const int nt = detail::resolve_threads(threads);
#pragma omp parallel num_threads(nt) if (nt > 1)
  {
    std::vector<double> tl(d), tr(d), ll(dp), lr(dp), D(d), V(dp);
#pragma omp for schedule(dynamic, 4)
    for (int k = s; k < e; ++k) {
      const bool ok_l = segment_normalizer(est, s, k, tl.data(), ll.data());
      const bool ok_r = segment_normalizer(est, k + 1, e, tr.data(), lr.data());
      if (ok_l && ok_r) {
        out[k - s] = combine(tl.data(), ll.data(), k - s + 1, tr.data(), lr.data(), e - k, d, D.data(), V.data());
      }
    }
  }
  return out;
}

ScanMax profile_max(const std::vector<double>& profile, int s) {
  ScanMax best;
  double value = -1.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    if (profile[i] > value) {
      value = profile[i];
      best = {profile[i], s + static_cast<int>(i)};
    }
  }
  return best;
}

std::vector<double> local_profile(const Estimator& est, int h, int threads) {
  const int n = est.n();
  const int lo = est.first_index();
  const int d = est.dim();
  const int dp = packed_size(d);
  std::vector<double> out(n, 0.0);
  const int first = lo + h - 1;
  if (first > n - h) return out;

  // Segment [b-h+1, b] statistics for every admissible end point b.
  const int count = n - first + 1;
  std::vector<double> theta(static_cast<std::size_t>(count) * d), lambda(static_cast<std::size_t>(count) * dp);
  std::vector<char> ok(count);
  const int nt = detail::resolve_threads(threads);
#pragma omp parallel num_threads(nt) if (nt > 1)
  {
    std::vector<double> D(d), V(dp);
#pragma omp for schedule(dynamic, 16)
    for (int b = first; b <= n; ++b) {
      const std::size_t i = b - first;
      ok[i] = segment_normalizer(est, b - h + 1, b, theta.data() + i * d, lambda.data() + i * dp);
    }
#pragma omp for schedule(static)
    for (int k = first; k <= n - h; ++k) {
      const std::size_t l = k - first, r = k + h - first;
      if (!ok[l] || !ok[r]) continue;
      const double T = combine(theta.data() + l * d, lambda.data() + l * dp, h, theta.data() + r * d,
                               lambda.data() + r * dp, h, d, D.data(), V.data());
      out[k - 1] = std::max(T, 0.0);
    }
  }
  return out;
}

}  // namespace snseg

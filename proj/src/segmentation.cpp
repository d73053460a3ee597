#include "snseg/segmentation.hpp"

#include "parallel.hpp"
#include "snseg/rng.hpp"
#include "snseg/scan.hpp"
#include "snseg/sn_statistic.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

namespace snseg {

std::string to_string(Method m) {
  switch (m) {
    case Method::sncp:
      return "sncp";
    case Method::snbs:
      return "snbs";
    case Method::snlocal:
      return "snlocal";
    case Method::snwbs:
      return "snwbs";
    case Method::snsbs:
      return "snsbs";
  }
  return {};
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::sncp, Method::snbs, Method::snlocal, Method::snwbs, Method::snsbs}) {
    if (text == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown method '" + std::string(text) + "'");
}

int window_size(int n, double epsilon) { return static_cast<int>(std::floor(n * epsilon + 1e-9)); }

namespace {

struct Context {
  const TimeSeries& series;
  const DetectionConfig& config;
  Estimator est;
  int h;
  DetectionResult result;

  Context(const TimeSeries& s, const DetectionConfig& c)
      : series(s), config(c), est(s, c.functional), h(window_size(s.n(), c.epsilon)) {
    if (!(c.epsilon > 0.0 && c.epsilon < 1.0)) throw std::invalid_argument("epsilon must lie in (0,1)");
    if (!(c.threshold > 0.0)) throw std::invalid_argument("threshold must be positive");
    if (h < 2) throw std::invalid_argument("window size floor(n*epsilon) must be at least 2");
    result.config = c;
    result.h = h;
    if (est.n() - est.first_index() + 1 < 2 * h) result.notes.emplace_back("series shorter than 2h");
  }

  DetectionResult finish() {
    std::vector<int> pts;
    for (const auto& d : result.statistics) pts.push_back(d.k);
    std::sort(pts.begin(), pts.end());
    result.changepoints = ChangePointSet(std::move(pts), series.n());
    return std::move(result);
  }
};

// Profile over k = s..e from a per-k query; smallest k wins ties.
using Query = std::function<WindowMax(int k, int s, int e)>;

void sncp_recurse(Context& ctx, const Query& query, int s, int e, int depth) {
  if (e - s + 1 < 2 * ctx.h) return;
  TraceNode node{.s = s, .e = e, .depth = depth};
  WindowMax best;
  int kstar = -1;
  double best_value = -1.0;
  for (int k = s; k <= e; ++k) {
    const WindowMax wm = query(k, s, e);
    if (ctx.config.record_trace) node.profile.push_back(wm.T);
    if (wm.T > best_value) {
      best_value = wm.T;
      best = wm;
      kstar = k;
    }
  }
  node.argmax = kstar;
  node.max = best.T;
  node.split = best.T > ctx.config.threshold;
  if (ctx.config.record_trace) ctx.result.trace.push_back(std::move(node));
  if (best.T <= ctx.config.threshold) return;
  ctx.result.statistics.push_back({kstar, best.T, best.window, s, e});
  sncp_recurse(ctx, query, s, kstar, depth + 1);
  sncp_recurse(ctx, query, kstar + 1, e, depth + 1);
}

void snbs_recurse(Context& ctx, int s, int e, int depth) {
  if (e - s + 1 < 2 * ctx.h) return;
  const auto profile = single_cp_profile(ctx.est, s, e, ctx.config.threads);
  const ScanMax best = profile_max(profile, s);
  const double value = std::max(best.T, 0.0);
  const bool split = best.k >= 0 && value > ctx.config.threshold;
  if (ctx.config.record_trace) {
    TraceNode node{.s = s, .e = e, .depth = depth, .argmax = best.k, .max = value, .split = split};
    for (double v : profile) node.profile.push_back(std::max(v, 0.0));
    ctx.result.trace.push_back(std::move(node));
  }
  if (!split) return;
  ctx.result.statistics.push_back({best.k, value, Window{s, e}, s, e});
  snbs_recurse(ctx, s, best.k, depth + 1);
  snbs_recurse(ctx, best.k + 1, e, depth + 1);
}

struct IntervalStat {
  Window w;
  ScanMax best;
};

// Largest-statistic interval inside [s,e] wins; the segment itself is always a candidate.
void interval_recurse(Context& ctx, const std::vector<IntervalStat>& stats, std::map<std::pair<int, int>, ScanMax>& memo,
                      int s, int e, int depth) {
  if (e - s + 1 < 2 * ctx.h) return;
  auto it = memo.find({s, e});
  if (it == memo.end()) {
    it = memo.emplace(std::pair{s, e}, profile_max(single_cp_profile(ctx.est, s, e, ctx.config.threads), s)).first;
  }
  IntervalStat best{Window{s, e}, it->second};
  for (const auto& st : stats) {
    if (st.w.t1 < s || st.w.t2 > e || st.best.k < 0) continue;
    if (st.best.T > best.best.T || best.best.k < 0) best = st;
  }
  const double value = std::max(best.best.T, 0.0);
  const bool split = best.best.k >= 0 && value > ctx.config.threshold;
  if (ctx.config.record_trace) {
    ctx.result.trace.push_back({.s = s, .e = e, .depth = depth, .argmax = best.best.k, .max = value, .split = split});
  }
  if (!split) return;
  ctx.result.statistics.push_back({best.best.k, value, best.w, s, e});
  interval_recurse(ctx, stats, memo, s, best.best.k, depth + 1);
  interval_recurse(ctx, stats, memo, best.best.k + 1, e, depth + 1);
}

DetectionResult run_intervals(Context& ctx, const std::vector<Window>& intervals) {
  std::vector<IntervalStat> stats(intervals.size());
  const int nt = detail::resolve_threads(ctx.config.threads);
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt) if (nt > 1)
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const Window w = intervals[i];
    stats[i] = {w, profile_max(single_cp_profile(ctx.est, w.t1, w.t2, 1), w.t1)};
  }
  std::map<std::pair<int, int>, ScanMax> memo;
  interval_recurse(ctx, stats, memo, ctx.est.first_index(), ctx.series.n(), 0);
  return ctx.finish();
}

}  // namespace

DetectionResult sncp_detect(const TimeSeries& series, const DetectionConfig& config) {
  Context ctx(series, config);
  const int lo = ctx.est.first_index();
  if (series.n() - lo + 1 < 2 * ctx.h) return ctx.finish();
  const NestedScan scan(ctx.est, ctx.h, config.threads);
  sncp_recurse(ctx, [&scan](int k, int s, int e) { return scan.query(k, s, e); }, lo, series.n(), 0);
  return ctx.finish();
}

DetectionResult snbs_detect(const TimeSeries& series, const DetectionConfig& config) {
  Context ctx(series, config);
  snbs_recurse(ctx, ctx.est.first_index(), series.n(), 0);
  return ctx.finish();
}

DetectionResult snlocal_detect(const TimeSeries& series, const DetectionConfig& config) {
  Context ctx(series, config);
  const int n = series.n();
  const int h = ctx.h;
  const auto T = local_profile(ctx.est, h, config.threads);
  if (config.record_trace) {
    ctx.result.trace.push_back({.s = ctx.est.first_index(), .e = n, .depth = 0, .profile = T});
  }
  for (int k = 1; k <= n; ++k) {
    const double v = T[k - 1];
    if (!(v > config.threshold)) continue;
    bool is_max = true;
    for (int j = std::max(1, k - h); j <= std::min(n, k + h) && is_max; ++j) {
      if (j < k) is_max = T[j - 1] < v;
      if (j > k) is_max = T[j - 1] <= v;
    }
    if (is_max) ctx.result.statistics.push_back({k, v, Window{k - h + 1, k + h}, k - h + 1, k + h});
  }
  return ctx.finish();
}

DetectionResult snwbs_detect(const TimeSeries& series, const DetectionConfig& config) {
  Context ctx(series, config);
  if (config.wbs_intervals < 1) throw std::invalid_argument("snwbs needs at least one random interval");
  const int lo = ctx.est.first_index();
  std::vector<Window> intervals;
  if (series.n() - lo + 1 >= ctx.h) intervals = wbs_intervals(lo, series.n(), config.wbs_intervals, ctx.h, config.seed);
  return run_intervals(ctx, intervals);
}

DetectionResult snsbs_detect(const TimeSeries& series, const DetectionConfig& config) {
  Context ctx(series, config);
  if (!(config.sbs_decay > 0.0 && config.sbs_decay < 1.0)) throw std::invalid_argument("snsbs decay must lie in (0,1)");
  const int lo = ctx.est.first_index();
  std::vector<Window> intervals;
  if (series.n() - lo + 1 >= ctx.h) intervals = seeded_intervals(lo, series.n(), config.sbs_decay, ctx.h);
  return run_intervals(ctx, intervals);
}

DetectionResult detect(const TimeSeries& series, const DetectionConfig& config) {
  switch (config.method) {
    case Method::sncp:
      return sncp_detect(series, config);
    case Method::snbs:
      return snbs_detect(series, config);
    case Method::snlocal:
      return snlocal_detect(series, config);
    case Method::snwbs:
      return snwbs_detect(series, config);
    case Method::snsbs:
      return snsbs_detect(series, config);
  }
  throw std::invalid_argument("unknown method");
}

namespace {
int ceil_guarded(double x) { return static_cast<int>(std::ceil(x - 1e-9)); }
}  // namespace

std::vector<Window> seeded_intervals(int lo, int n, double decay, int min_length) {
  const int N = n - lo + 1;
  std::vector<Window> out;
  for (int k = 0;; ++k) {
    const double len = N * std::pow(decay, k);
    if (ceil_guarded(len) < min_length) break;
    const int count = 2 * ceil_guarded(std::pow(1.0 / decay, k)) - 1;
    const double shift = count > 1 ? (N - len) / (count - 1) : 0.0;
    for (int i = 0; i < count; ++i) {
      const int t1 = static_cast<int>(std::floor(i * shift)) + 1;
      const int t2 = std::min(N, ceil_guarded(i * shift + len));
      out.push_back({t1 + lo - 1, t2 + lo - 1});
    }
  }
  return out;
}

std::vector<Window> wbs_intervals(int lo, int n, int count, int min_length, std::uint64_t seed) {
  const int N = n - lo + 1;
  if (min_length > N) return {};
  Rng rng(seed);
  std::vector<Window> out;
  out.reserve(count);
  for (int m = 0; m < count; ++m) {
    const int L = static_cast<int>(rng.uniform_int(min_length, N));
    const int t1 = static_cast<int>(rng.uniform_int(lo, n - L + 1));
    out.push_back({t1, t1 + L - 1});
  }
  return out;
}

namespace reference {

DetectionResult sncp_detect(const TimeSeries& series, const DetectionConfig& config) {
  Context ctx(series, config);
  const auto& est = ctx.est;
  const int h = ctx.h;
  sncp_recurse(ctx, [&est, h](int k, int s, int e) { return max_window_statistic(est, k, s, e, h); },
               est.first_index(), series.n(), 0);
  return ctx.finish();
}

}  // namespace reference

}  // namespace snseg

#include "snseg/dgp.hpp"

#include "parallel.hpp"
#include "snseg/refinement.hpp"
#include "snseg/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <chrono>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace snseg {

namespace {

constexpr double kSigma = 2.0;
constexpr double kXi = 0.125;

using Params = std::map<std::string, double, std::less<>>;

Eigen::MatrixXd scaled_identity(int k, double v) { return Eigen::MatrixXd::Identity(k, k) * v; }

// d-dimensional VAR(1) rho I with unit innovations and a common mean level per regime.
DgpPreset mean_shift(std::string name, int n, int d, double rho, const std::vector<int>& ends,
                     const std::vector<double>& levels) {
  DgpPreset p{.name = std::move(name), .n = n, .p = d, .q = d};
  p.burn_in = rho == 0.0 ? 0 : 500;
  p.noise = rho == 0.0 ? "iid N(0, I_d)" : "VAR(1) rho I, unit innovation";
  for (std::size_t r = 0; r < ends.size(); ++r) {
    p.regimes.push_back({.end = ends[r],
                         .A = scaled_identity(d, rho),
                         .B = scaled_identity(d, 1.0),
                         .mu = Eigen::VectorXd::Constant(d, levels[r]),
                         .C = scaled_identity(d, 1.0)});
  }
  return p;
}

// Univariate Y_t = a_r Y_{t-1} + b_r eps_t.
DgpPreset ar_switching(std::string name, int n, const std::vector<int>& ends, const std::vector<double>& a,
                       const std::vector<double>& b) {
  DgpPreset p{.name = std::move(name), .n = n, .p = 1, .q = 1};
  p.noise = "AR(1), regime-specific coefficient and innovation scale";
  bool dependent = false;
  for (std::size_t r = 0; r < ends.size(); ++r) {
    dependent = dependent || a[r] != 0.0;
    p.regimes.push_back({.end = ends[r],
                         .A = scaled_identity(1, a[r]),
                         .B = scaled_identity(1, b[r]),
                         .mu = Eigen::VectorXd::Zero(1),
                         .C = scaled_identity(1, 1.0)});
  }
  p.burn_in = dependent ? 500 : 0;
  return p;
}

// Bivariate Y_t = 0.5 Y_{t-1} + c_r e_t with e_t ~ N(0, [[1, r], [r, 1]]).
DgpPreset correlation_switching(std::string name, const std::vector<double>& c, const std::vector<double>& r) {
  DgpPreset p{.name = std::move(name), .n = 1000, .p = 2, .q = 2};
  p.noise = "VAR(1) 0.5 I, correlated innovations";
  const std::vector<int> ends{333, 667, 1000};
  for (std::size_t k = 0; k < ends.size(); ++k) {
    Eigen::MatrixXd chol(2, 2);
    chol << 1.0, 0.0, r[k], std::sqrt(1.0 - r[k] * r[k]);
    p.regimes.push_back({.end = ends[k],
                         .A = scaled_identity(2, 0.5),
                         .B = c[k] * chol,
                         .mu = Eigen::VectorXd::Zero(2),
                         .C = scaled_identity(2, 1.0)});
  }
  return p;
}

// Y_t = c_r L0 F_t + e_t with F_t a VAR(1) 0.3 I_2 and L0 loading factor 1 on Y1, Y2 and factor 2 on Y3, Y4.
DgpPreset factor_model(std::string name, const std::vector<double>& c) {
  DgpPreset p{.name = std::move(name), .n = 1000, .p = 4, .q = 2};
  p.noise = "dynamic factor model, VAR(1) 0.3 I_2 factors plus N(0, I_4) noise";
  Eigen::MatrixXd L0(4, 2);
  L0 << 1, 0, 1, 0, 0, 1, 0, 1;
  const std::vector<int> ends{333, 667, 1000};
  for (std::size_t k = 0; k < ends.size(); ++k) {
    p.regimes.push_back({.end = ends[k],
                         .A = scaled_identity(2, 0.3),
                         .B = scaled_identity(2, 1.0),
                         .mu = Eigen::VectorXd::Zero(4),
                         .C = c[k] * L0,
                         .D = scaled_identity(4, 1.0)});
  }
  return p;
}

// Unit-variance AR(1) with rho = 0.2, mapped through F^{-1}(Phi(.)) on the flagged regimes.
DgpPreset quantile_switching(std::string name, const std::vector<int>& ends, const std::vector<bool>& mapped) {
  const double rho = 0.2;
  DgpPreset p{.name = std::move(name), .n = 1000, .p = 1, .q = 1};
  p.noise = "AR(1) rho 0.2, unit variance";
  for (std::size_t k = 0; k < ends.size(); ++k) {
    p.regimes.push_back({.end = ends[k],
                         .A = scaled_identity(1, rho),
                         .B = scaled_identity(1, std::sqrt(1.0 - rho * rho)),
                         .mu = Eigen::VectorXd::Zero(1),
                         .C = scaled_identity(1, 1.0),
                         .transform = mapped[k] ? Transform::gpd_mixture : Transform::none});
  }
  return p;
}

Params parse_params(std::string_view text) {
  Params out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string_view::npos) comma = text.size();
    const auto item = text.substr(start, comma - start);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw std::invalid_argument("preset parameter '" + std::string(item) + "' lacks '='");
    double v = 0.0;
    const auto val = item.substr(eq + 1);
    auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
    if (ec != std::errc() || ptr != val.data() + val.size()) {
      throw std::invalid_argument("bad preset parameter value '" + std::string(val) + "'");
    }
    out.emplace(std::string(item.substr(0, eq)), v);
    start = comma + 1;
  }
  return out;
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

ChangePointSet DgpPreset::truth() const {
  std::vector<int> pts;
  for (std::size_t r = 0; r + 1 < regimes.size(); ++r) pts.push_back(regimes[r].end);
  return ChangePointSet(std::move(pts), n);
}

void DgpPreset::validate() const {
  if (regimes.empty() || regimes.back().end != n) throw std::invalid_argument("preset regimes must end at n");
  for (const auto& r : regimes) {
    if (r.A.rows() != q || r.A.cols() != q || r.B.rows() != q || r.B.cols() != q || r.mu.size() != p ||
        r.C.rows() != p || r.C.cols() != q || (r.D.size() != 0 && (r.D.rows() != p || r.D.cols() != p))) {
      throw std::invalid_argument("preset " + name + " has inconsistent regime shapes");
    }
  }
  truth();
}

std::vector<std::string> preset_names() {
  return {"M1", "M2", "M3", "M4", "M5", "V1", "A1", "R1", "R2", "C1", "C2",
          "Q1", "MP1", "MP2", "MP3", "LR1", "LR2", "LR3", "LR4", "NULL"};
}

DgpPreset make_preset(std::string_view text) {
  const auto colon = text.find(':');
  const std::string base(text.substr(0, colon));
  Params params = colon == std::string_view::npos ? Params{} : parse_params(text.substr(colon + 1));
  auto take = [&params](const char* key, double fallback) {
    const auto it = params.find(key);
    if (it == params.end()) return fallback;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  auto take_int = [&take](const char* key, int fallback) {
    const double v = take(key, fallback);
    if (v != std::floor(v) || v < 1) throw std::invalid_argument(std::string("preset parameter ") + key + " must be a positive integer");
    return static_cast<int>(v);
  };

  DgpPreset p;
  if (base == "M1" || base == "M2" || base == "M3" || base == "LR1" || base == "LR2" || base == "LR3" ||
      base == "LR4") {
    const int d = take_int("d", 1);
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    const std::string name = base + ":d=" + std::to_string(d);
    if (base == "M1") {
      p = mean_shift(name, 600, d, 0.2, {100, 200, 300, 400, 500, 600}, {0, 2 * s, 0, 2 * s, 0, 2 * s});
    } else if (base == "M2") {
      p = mean_shift(name, 1000, d, 0.5, {75, 375, 425, 525, 575, 1000}, {-3 * s, 0, 3 * s, 0, -3 * s, 0});
    } else if (base == "M3") {
      p = mean_shift(name, 2000, d, -0.7, {1000, 1500, 2000}, {0.4 * s, 0, 0.4 * s});
    } else if (base == "LR1") {
      p = mean_shift(name, 600, d, 0.0, {300, 600}, {0, 0.5 * s});
    } else if (base == "LR2") {
      p = mean_shift(name, 600, d, 0.0, {300, 600}, {0, s});
    } else if (base == "LR3") {
      p = mean_shift(name, 1000, d, 0.0, {333, 667, 1000}, {0, 0.5 * s, 0});
    } else {
      p = mean_shift(name, 1000, d, 0.0, {333, 667, 1000}, {0, s, 0});
    }
  } else if (base == "M4") {
    p = mean_shift("M4", 2000, 1, 0.7, {1000, 1500, 2000}, {0.8, 0.0, 0.8});
  } else if (base == "M5") {
    p = mean_shift("M5", 2000, 1, 0.7, {1000, 1500, 2000}, {0.0, 0.8, 1.6});
  } else if (base == "V1") {
    p = ar_switching("V1", 1024, {400, 750, 1024}, {0.5, 0.5, 0.5}, {1.0, 2.0, 1.0});
  } else if (base == "A1") {
    p = ar_switching("A1", 1024, {400, 750, 1024}, {0.5, 0.9, 0.3}, {1.0, 1.0, 1.0});
  } else if (base == "MP2") {
    p = ar_switching("MP2", 1000, {333, 667, 1000}, {0.0, 0.0, 0.0}, {1.0, 1.6, 1.0});
  } else if (base == "MP3") {
    p = ar_switching("MP3", 1000, {333, 667, 1000}, {0.1, 0.6, 0.1}, {1.0, 1.0, 1.0});
  } else if (base == "R1") {
    p = correlation_switching("R1", {2.0, 1.0, 1.0}, {0.8, 0.2, 0.8});
  } else if (base == "R2") {
    p = correlation_switching("R2", {std::sqrt(2.0), 1.0, 2.0}, {0.8, 0.2, 0.2});
  } else if (base == "C1") {
    p = factor_model("C1", {1.0, std::sqrt(3.0), 1.0});
  } else if (base == "C2") {
    p = factor_model("C2", {1.0, std::sqrt(3.0), 3.0});
  } else if (base == "MP1") {
    p = quantile_switching("MP1", {333, 667, 1000}, {false, true, false});
  } else if (base == "Q1") {
    p = quantile_switching("Q1", {500, 1000}, {false, true});
  } else if (base == "NULL") {
    const int n = take_int("n", 1024);
    const double rho = take("rho", 0.0);
    const int d = take_int("d", 1);
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("NULL preset needs |rho| < 1");
    p = mean_shift("NULL:n=" + std::to_string(n) + ",rho=" + format_number(rho) + ",d=" + std::to_string(d), n, d,
                   rho, {n}, {0.0});
  } else {
    throw std::invalid_argument("unknown preset '" + base + "'");
  }
  if (!params.empty()) {
    throw std::invalid_argument("preset " + base + " does not take parameter '" + params.begin()->first + "'");
  }
  p.validate();
  return p;
}

double gpd_mixture_cdf(double x) {
  if (x <= 0.0) return 0.5 * std::erfc(-x / std::numbers::sqrt2);
  return 1.0 - 0.5 * std::pow(1.0 + kXi * x / kSigma, -1.0 / kXi);
}

double gpd_mixture_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile level must lie in (0,1)");
  if (q <= 0.5) return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
  return kSigma * (std::pow(2.0 - 2.0 * q, -kXi) - 1.0) / kXi;
}

double gpd_mixture_transform(double x) {
  if (x <= 0.0) return x;
  // 2 - 2 Phi(x) = erfc(x / sqrt 2)
  return kSigma * (std::pow(std::erfc(x / std::numbers::sqrt2), -kXi) - 1.0) / kXi;
}

Sample generate(const DgpPreset& preset, std::uint64_t seed) {
  preset.validate();
  Rng rng(seed);
  const int p = preset.p, q = preset.q;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(q), eps(q), eta(p), y(p);
  auto step = [&](const Regime& r) {
    for (int i = 0; i < q; ++i) eps(i) = rng.normal();
    x = r.A * x + r.B * eps;
  };
  for (int t = 0; t < preset.burn_in; ++t) step(preset.regimes.front());

  Eigen::MatrixXd out(preset.n, p);
  std::size_t reg = 0;
  for (int t = 1; t <= preset.n; ++t) {
    while (t > preset.regimes[reg].end) ++reg;
    const Regime& r = preset.regimes[reg];
    step(r);
    y = r.mu + r.C * x;
    if (r.D.size() != 0) {
      for (int i = 0; i < p; ++i) eta(i) = rng.normal();
      y += r.D * eta;
    }
    if (r.transform == Transform::gpd_mixture) {
      for (int i = 0; i < p; ++i) y(i) = gpd_mixture_transform(y(i));
    }
    out.row(t - 1) = y.transpose();
  }
  return {TimeSeries(std::move(out)), preset.truth()};
}

ExperimentResult run_experiment(const DgpPreset& preset, const std::vector<MethodConfig>& methods, int reps,
                                std::uint64_t base_seed, int threads) {
  if (reps < 1) throw std::invalid_argument("reps must be at least 1");
  if (methods.empty()) throw std::invalid_argument("at least one method is required");
  const ChangePointSet truth = preset.truth();
  const std::size_t M = methods.size();
  ExperimentResult result{preset.name, reps, base_seed, truth.points(), {}, {}};
  result.records.resize(static_cast<std::size_t>(reps) * M);

  const int nt = detail::resolve_threads(threads);
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 1) num_threads(nt) if (nt > 1)
  for (int r = 0; r < reps; ++r) {
    try {
      const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(r));
      const Sample sample = generate(preset, seed);
      for (std::size_t m = 0; m < M; ++m) {
        DetectionConfig cfg = methods[m].detection;
        cfg.threads = 1;
        cfg.record_trace = false;
        const auto t0 = std::chrono::steady_clock::now();
        const auto det = detect(sample.series, cfg);
        ReplicationRecord rec{r, seed, m, det.changepoints.points(), {}, evaluate(truth, det.changepoints), {}, 0.0};
        if (methods[m].refine) {
          ChangePointSet refined = det.changepoints;
          if (!det.changepoints.empty()) {
            const RefinementConfig rc{default_trim(cfg.epsilon, sample.series.n()), cfg.functional};
            refined = refine(sample.series, det.changepoints, rc).points;
          }
          rec.refined = refined.points();
          rec.refined_metrics = evaluate(truth, refined);
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.records[static_cast<std::size_t>(r) * M + m] = std::move(rec);
      }
    } catch (...) {
#pragma omp critical(snseg_experiment_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  const int m_true = static_cast<int>(truth.size());
  for (std::size_t m = 0; m < M; ++m) {
    MethodSummary s;
    s.label = methods[m].label;
    s.refined = methods[m].refine;
    for (int r = 0; r < reps; ++r) {
      const auto& rec = result.records[static_cast<std::size_t>(r) * M + m];
      const int diff = static_cast<int>(rec.estimate.size()) - m_true;
      ++s.histogram[std::clamp(diff, -3, 3) + 3];
      s.mean_ari += rec.metrics.ari;
      s.mean_d1 += rec.metrics.distances.d1;
      s.mean_d2 += rec.metrics.distances.d2;
      s.mean_dH += rec.metrics.distances.dH;
      if (rec.refined_metrics) {
        s.refined_mean_ari += rec.refined_metrics->ari;
        s.refined_mean_d1 += rec.refined_metrics->distances.d1;
        s.refined_mean_d2 += rec.refined_metrics->distances.d2;
        s.refined_mean_dH += rec.refined_metrics->distances.dH;
      }
      s.seconds += rec.seconds;
    }
    const double R = reps;
    s.correct_rate = s.histogram[3] / R;
    for (double* v : {&s.mean_ari, &s.mean_d1, &s.mean_d2, &s.mean_dH, &s.refined_mean_ari, &s.refined_mean_d1,
                      &s.refined_mean_d2, &s.refined_mean_dH}) {
      *v /= R;
    }
    result.summaries.push_back(s);
  }
  return result;
}

}  // namespace snseg

#include "snseg/dgp.hpp"
#include "snseg/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using snseg::ChangePointSet;

namespace {

double phi(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Bisection on the CDF, used as an independent inverse.
double invert_cdf(double q) {
  double lo = -40.0, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (snseg::gpd_mixture_cdf(mid) < q ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST(Rng, ReferenceStreams) {
  EXPECT_EQ(snseg::splitmix64(0), 0xE220A8397B1DCDAFULL);
  snseg::Rng rng(5489);
  std::uint64_t last = 0;
  for (int i = 0; i < 10000; ++i) last = rng.bits();
  EXPECT_EQ(last, 9981545732273789042ULL);
  EXPECT_EQ(snseg::derive_seed(7, 3), snseg::splitmix64(7 + 0x9E3779B97F4A7C15ULL * 4));
}

TEST(Rng, UniformAndNormalMoments) {
  snseg::Rng rng(3);
  double s = 0.0, s2 = 0.0, u = 0.0;
  const int m = 200000;
  for (int i = 0; i < m; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
    const double v = rng.uniform();
    ASSERT_GE(v, 0.0);
    ASSERT_LT(v, 1.0);
    u += v;
  }
  EXPECT_NEAR(s / m, 0.0, 0.01);
  EXPECT_NEAR(s2 / m, 1.0, 0.015);
  EXPECT_NEAR(u / m, 0.5, 0.005);
}

TEST(Rng, UniformIntCoversRangeEvenly) {
  snseg::Rng rng(9);
  std::vector<int> hits(7, 0);
  for (int i = 0; i < 70000; ++i) {
    const auto v = rng.uniform_int(3, 9);
    ASSERT_GE(v, 3);
    ASSERT_LE(v, 9);
    ++hits[static_cast<std::size_t>(v - 3)];
  }
  for (int h : hits) EXPECT_NEAR(h, 10000, 400);
  EXPECT_THROW(rng.uniform_int(2, 1), std::invalid_argument);
}

TEST(Presets, M1Truth) {
  const auto p = snseg::make_preset("M1");
  EXPECT_EQ(p.n, 600);
  EXPECT_EQ(p.truth(), ChangePointSet({100, 200, 300, 400, 500}, 600));
  ASSERT_EQ(p.regimes.size(), 6u);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(p.regimes[r].mu(0), r % 2 == 0 ? 0.0 : 2.0);
  // Stationary AR(1) mean equals the regime level, so segment averages track 0 and 2.
  std::vector<double> avg(6, 0.0);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto s = snseg::generate(p, seed);
    for (int t = 1; t <= 600; ++t) avg[static_cast<std::size_t>((t - 1) / 100)] += s.series(t, 1) / 5000.0;
  }
  for (std::size_t r = 0; r < 6; ++r) EXPECT_NEAR(avg[r], r % 2 == 0 ? 0.0 : 2.0, 0.08);
}

TEST(Presets, EveryNameGenerates) {
  for (const auto& name : snseg::preset_names()) {
    const auto p = snseg::make_preset(name);
    const auto s = snseg::generate(p, 1);
    EXPECT_EQ(s.series.n(), p.n) << name;
    EXPECT_EQ(s.series.p(), p.p) << name;
    EXPECT_TRUE(s.series.data().allFinite()) << name;
    EXPECT_EQ(s.truth, p.truth()) << name;
  }
}

TEST(Presets, ParametersAndErrors) {
  EXPECT_EQ(snseg::make_preset("M1:d=5").p, 5);
  EXPECT_EQ(snseg::make_preset("NULL:n=300,rho=0.5,d=2").n, 300);
  EXPECT_TRUE(snseg::make_preset("NULL:n=300").truth().empty());
  EXPECT_THROW(snseg::make_preset("M9"), std::invalid_argument);
  EXPECT_THROW(snseg::make_preset("M1:n=3"), std::invalid_argument);
  EXPECT_THROW(snseg::make_preset("M1:d=0"), std::invalid_argument);
  EXPECT_THROW(snseg::make_preset("NULL:rho=1"), std::invalid_argument);
  EXPECT_THROW(snseg::make_preset("NULL:rho"), std::invalid_argument);
  EXPECT_EQ(snseg::make_preset("M4").burn_in, 500);
  EXPECT_EQ(snseg::make_preset("LR4").burn_in, 0);
}

TEST(Presets, SeedDeterminism) {
  const auto p = snseg::make_preset("C1");
  const auto a = snseg::generate(p, 42), b = snseg::generate(p, 42), c = snseg::generate(p, 43);
  EXPECT_EQ(a.series.data(), b.series.data());
  EXPECT_NE(a.series.data(), c.series.data());
}

TEST(Presets, Ar1LagOneAutocorrelation) {
  const auto s = snseg::generate(snseg::make_preset("NULL:n=100000,rho=0.5"), 8);
  const Eigen::VectorXd x = s.series.data().col(0);
  const double m = x.mean();
  double num = 0.0, den = 0.0;
  for (Eigen::Index t = 0; t < x.size(); ++t) {
    den += (x(t) - m) * (x(t) - m);
    if (t > 0) num += (x(t) - m) * (x(t - 1) - m);
  }
  EXPECT_NEAR(num / den, 0.5, 0.02);
  EXPECT_NEAR(den / x.size(), 1.0 / 0.75, 0.05);
}

TEST(Presets, FactorModelSegmentCovariance) {
  const auto p = snseg::make_preset("C1");
  Eigen::MatrixXd L0(4, 2);
  L0 << 1, 0, 1, 0, 0, 1, 0, 1;
  const double factor_var = 1.0 / (1.0 - 0.09);
  for (const auto& [lo, hi, c2] : {std::tuple{1, 333, 1.0}, std::tuple{334, 667, 3.0}}) {
    const Eigen::MatrixXd expected = c2 * factor_var * L0 * L0.transpose() + Eigen::MatrixXd::Identity(4, 4);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(4, 4);
    int count = 0;
    for (std::uint64_t seed = 0; seed < 150; ++seed) {
      const auto s = snseg::generate(p, seed);
      for (int t = lo; t <= hi; ++t) {
        const Eigen::VectorXd y = s.series.data().row(t - 1).transpose();
        acc += y * y.transpose();
        ++count;
      }
    }
    acc /= count;
    EXPECT_LT((acc - expected).cwiseAbs().maxCoeff(), 0.12) << "segment starting at " << lo << "\n" << acc;
  }
}

TEST(GpdMixture, QuantileValues) {
  EXPECT_EQ(snseg::gpd_mixture_quantile(0.5), 0.0);
  EXPECT_NEAR(snseg::gpd_mixture_quantile(0.75), 2.0 * (std::pow(0.5, -0.125) - 1.0) / 0.125, 1e-13);
  EXPECT_NEAR(snseg::gpd_mixture_quantile(0.75), 1.4481, 1e-4);
  EXPECT_NEAR(snseg::gpd_mixture_quantile(0.25), -0.6744897501960817, 1e-13);
  EXPECT_THROW(snseg::gpd_mixture_quantile(1.0), std::invalid_argument);
  for (double q : {0.01, 0.1, 0.3, 0.5, 0.6, 0.9, 0.99, 0.999}) {
    EXPECT_NEAR(snseg::gpd_mixture_quantile(q), invert_cdf(q), 1e-8 * (1.0 + std::abs(invert_cdf(q)))) << q;
    EXPECT_NEAR(snseg::gpd_mixture_cdf(snseg::gpd_mixture_quantile(q)), q, 1e-13) << q;
  }
}

TEST(GpdMixture, TransformMatchesQuantileOfPhi) {
  double prev = -std::numeric_limits<double>::infinity();
  for (double x = -4.0; x <= 6.0; x += 0.01) {
    const double v = snseg::gpd_mixture_transform(x);
    EXPECT_GT(v, prev);
    prev = v;
    if (x < 5.0) EXPECT_NEAR(v, invert_cdf(phi(x)), 1e-7 * (1.0 + std::abs(v))) << x;
  }
  EXPECT_EQ(snseg::gpd_mixture_transform(0.0), 0.0);
  EXPECT_NEAR(snseg::gpd_mixture_transform(1e-9), 0.0, 1e-8);
  EXPECT_NEAR(snseg::gpd_mixture_cdf(1e-12), 0.5, 1e-12);
  // Far in the tail the direct erfc form stays finite where 1 - Phi(x) underflows.
  EXPECT_TRUE(std::isfinite(snseg::gpd_mixture_transform(30.0)));
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
  const auto p = snseg::make_preset("M1");
  std::vector<snseg::MethodConfig> methods(2);
  methods[0].label = "sncp";
  methods[1].label = "snbs";
  methods[1].detection.method = snseg::Method::snbs;
  methods[0].refine = true;
  const auto a = snseg::run_experiment(p, methods, 8, 3, 1);
  const auto b = snseg::run_experiment(p, methods, 8, 3, 4);
  ASSERT_EQ(a.records.size(), 16u);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].estimate, b.records[i].estimate);
    EXPECT_EQ(a.records[i].refined, b.records[i].refined);
    EXPECT_EQ(a.records[i].metrics.ari, b.records[i].metrics.ari);
  }
  for (std::size_t m = 0; m < 2; ++m) {
    EXPECT_EQ(a.summaries[m].histogram, b.summaries[m].histogram);
    EXPECT_EQ(a.summaries[m].mean_dH, b.summaries[m].mean_dH);
  }
}

TEST(Experiment, SingleReplicationMatchesDirectRun) {
  const auto p = snseg::make_preset("M1");
  snseg::MethodConfig m{.label = "sncp"};
  const auto res = snseg::run_experiment(p, {m}, 1, 17, 1);
  ASSERT_EQ(res.records.size(), 1u);
  const auto sample = snseg::generate(p, snseg::derive_seed(17, 0));
  const auto det = snseg::detect(sample.series, m.detection);
  EXPECT_EQ(res.records[0].estimate, det.changepoints.points());
  const auto ev = snseg::evaluate(p.truth(), det.changepoints);
  EXPECT_EQ(res.summaries[0].mean_ari, ev.ari);
  EXPECT_EQ(res.summaries[0].mean_dH, ev.distances.dH);
  const int diff = static_cast<int>(det.changepoints.size()) - 5;
  EXPECT_EQ(res.summaries[0].histogram[static_cast<std::size_t>(std::clamp(diff, -3, 3) + 3)], 1);
  EXPECT_THROW(snseg::run_experiment(p, {m}, 0, 1), std::invalid_argument);
  EXPECT_THROW(snseg::run_experiment(p, {}, 1, 1), std::invalid_argument);
}

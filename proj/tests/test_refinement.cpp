#include "oracle.hpp"
#include "snseg/dgp.hpp"
#include "snseg/refinement.hpp"
#include "snseg/segmentation.hpp"

#include <gtest/gtest.h>

using namespace snseg;

namespace {

TimeSeries steps(int n, const std::vector<int>& at, const std::vector<double>& levels) {
  Eigen::MatrixXd m(n, 1);
  std::size_t seg = 0;
  for (int t = 1; t <= n; ++t) {
    m(t - 1, 0) = levels[seg];
    if (seg < at.size() && t == at[seg]) ++seg;
  }
  return TimeSeries(m);
}

CriticalValueTable single_cp_table() {
  auto t = CriticalValueTable::builtin();
  const double K = simulate(0.05, 1, 0.9, Family::single_cp, 500, 1000, 3, 0);
  t.insert({{Family::single_cp, 0.05, 1, 0.9}, K, {"simulated", 500, 1000, 3}});
  return t;
}

}  // namespace

TEST(Refinement, DefaultTrim) {
  EXPECT_EQ(default_trim(0.05, 1000), 8);
  EXPECT_EQ(default_trim(0.05, 600), 5);
  EXPECT_EQ(default_trim(0.01, 10), 1);
}

TEST(Refinement, CusumExamples) {
  const auto y = TimeSeries::univariate({0, 0, 1, 1});
  EXPECT_DOUBLE_EQ((*cusum_stat(Estimator(y, FunctionalSpec::mean()), 2, 1, 4))[0], 0.5);
  const TimeSeries flat(Eigen::MatrixXd::Constant(30, 2, 4.0));
  EXPECT_EQ(cusum_stat(Estimator(flat, FunctionalSpec::covariance_matrix()), 12, 3, 25)->norm(), 0.0);
}

TEST(Refinement, CusumMatchesNaiveRecomputation) {
  const auto y = oracle::gaussian(70, 2, 13);
  for (const auto& spec : {FunctionalSpec::mean(), FunctionalSpec::variance(2), FunctionalSpec::quantile(1, 0.3)}) {
    const Estimator est(y, spec);
    for (int s = 1; s <= 30; s += 7) {
      for (int e = 45; e <= 70; e += 6) {
        for (int k = s; k < e; k += 4) {
          const auto got = *cusum_stat(est, k, s, e);
          const auto left = *oracle::estimate(y, spec, s, k), right = *oracle::estimate(y, spec, k + 1, e);
          const double scale = std::sqrt((k - s + 1.0) * (e - k)) / (e - s + 1.0);
          for (int c = 0; c < est.dim(); ++c) {
            const double want = scale * (right[c] - left[c]);
            EXPECT_LE(std::abs(got[c] - want), 1e-10 * (1.0 + std::abs(want)));
          }
        }
      }
    }
  }
}

TEST(Refinement, EmptySetAndBadTrim) {
  const auto y = oracle::gaussian(50, 1, 1);
  EXPECT_TRUE(refine(y, ChangePointSet({}, 50), {3, FunctionalSpec::mean()}).points.empty());
  EXPECT_THROW(refine(y, ChangePointSet({25}, 50), {0, FunctionalSpec::mean()}), std::invalid_argument);
}

TEST(Refinement, LocalIntervalsFollowBoundaryConvention) {
  const auto iv = local_intervals(ChangePointSet({100, 200, 300}, 400), 8, 1);
  const std::vector<Window> want{{1, 192}, {108, 292}, {208, 400}};
  EXPECT_EQ(iv, want);
}

TEST(Refinement, NoiselessStepsAreRecoveredExactly) {
  const auto y = steps(600, {150, 310, 420}, {0.0, 2.0, -1.0, 1.5});
  for (const std::vector<int>& start : {std::vector<int>{140, 300, 430}, std::vector<int>{160, 320, 415},
                                        std::vector<int>{150, 310, 420}}) {
    const auto r = refine(y, ChangePointSet(start, 600), {5, FunctionalSpec::mean()});
    EXPECT_EQ(r.points.points(), (std::vector<int>{150, 310, 420}));
    EXPECT_TRUE(r.warnings.empty());
  }
}

TEST(Refinement, MatchesNaiveSquaredCusumArgmax) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sample = generate(make_preset("LR4"), seed);
    const auto& y = sample.series;
    DetectionConfig c;
    c.threads = 1;
    const auto det = sncp_detect(y, c);
    if (det.changepoints.empty()) continue;
    const int trim = default_trim(0.05, y.n());
    const auto r = refine(y, det.changepoints, {trim, FunctionalSpec::mean()});
    const auto& k = det.changepoints.points();
    for (std::size_t i = 0; i < k.size(); ++i) {
      const int s = i == 0 ? 1 : k[i - 1] + trim;
      const int e = i + 1 == k.size() ? y.n() : k[i + 1] - trim;
      ASSERT_EQ(r.intervals[i], (Window{s, e}));
      double best = -1.0;
      int arg = -1;
      for (int j = s + trim; j <= e - trim; ++j) {
        double left = 0.0, right = 0.0;
        for (int t = s; t <= j; ++t) left += y(t, 1);
        for (int t = j + 1; t <= e; ++t) right += y(t, 1);
        const double T = std::sqrt((j - s + 1.0) * (e - j)) / (e - s + 1.0) * (right / (e - j) - left / (j - s + 1.0));
        if (T * T > best * (1.0 + 1e-12)) {
          best = T * T;
          arg = j;
        }
      }
      EXPECT_EQ(r.points.points()[i], arg) << "seed " << seed;
      EXPECT_GE(r.points.points()[i], s + trim);
      EXPECT_LE(r.points.points()[i], e - trim);
    }
  }
}

TEST(Refinement, CrowdedPointsKeptWithWarning) {
  const auto y = oracle::gaussian(100, 1, 4);
  const auto r = refine(y, ChangePointSet({40, 45, 80}, 100), {20, FunctionalSpec::mean()});
  EXPECT_EQ(r.points.points(), (std::vector<int>{40, 45, 80}));
  ASSERT_EQ(r.warnings.size(), 3u);
  EXPECT_NE(r.warnings[1].find("empty"), std::string::npos);
}

TEST(Attribution, ConstantSeriesFlagsNothing) {
  const TimeSeries flat(Eigen::MatrixXd::Constant(400, 1, 2.0));
  const auto table = single_cp_table();
  const auto a = attribute_features(flat, ChangePointSet({200}, 400), {FunctionalSpec::mean(), FunctionalSpec::variance()},
                                    table, 0.05, 0.9, 5);
  ASSERT_EQ(a.size(), 1u);
  for (const auto& item : a[0].items) {
    EXPECT_FALSE(item.flagged);
    EXPECT_EQ(item.statistic, 0.0);
  }
}

TEST(Attribution, MissingThresholdIsReported) {
  const auto y = oracle::gaussian(200, 1, 2);
  EXPECT_THROW(attribute_features(y, ChangePointSet({100}, 200), {FunctionalSpec::mean()}, CriticalValueTable::builtin(),
                                  0.05, 0.9, 5),
               CriticalValueNotFound);
}

TEST(Attribution, MeanShiftFlagsMean) {
  const auto table = single_cp_table();
  int flagged = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto y = oracle::gaussian(600, 1, seed);
    Eigen::MatrixXd m = y.data();
    m.bottomRows(300).array() += 1.5;
    const auto a = attribute_features(TimeSeries(m), ChangePointSet({300}, 600), {FunctionalSpec::mean()}, table, 0.05,
                                      0.9, default_trim(0.05, 600));
    flagged += a[0].items[0].flagged;
  }
  EXPECT_GE(flagged, 9);
}

TEST(Attribution, VarianceChangeFlagsVarianceMoreThanLowQuantile) {
  const auto table = single_cp_table();
  int var_flags = 0, q_flags = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sample = generate(make_preset("MP2"), seed);
    const int trim = default_trim(0.05, 1000);
    const auto a = attribute_features(sample.series, sample.truth,
                                      {FunctionalSpec::variance(1), FunctionalSpec::quantile(1, 0.1)}, table, 0.05,
                                      0.9, trim);
    for (const auto& at : a) {
      var_flags += at.items[0].flagged;
      q_flags += at.items[1].flagged;
      ++total;
    }
  }
  std::printf("variance flagged %d/%d, 10%% quantile flagged %d/%d\n", var_flags, total, q_flags, total);
  EXPECT_GT(var_flags, q_flags);
  EXPECT_GE(var_flags, total * 3 / 4);
}

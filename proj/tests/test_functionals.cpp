#include "oracle.hpp"
#include "snseg/functionals.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace snseg;

namespace {

std::vector<FunctionalSpec> all_specs(int p) {
  std::vector<FunctionalSpec> s{FunctionalSpec::mean(),
                                FunctionalSpec::variance(1),
                                FunctionalSpec::autocovariance(1, 1),
                                FunctionalSpec::autocovariance(1, 3),
                                FunctionalSpec::autocorrelation(1, 2),
                                FunctionalSpec::quantile(1, 0.5),
                                FunctionalSpec::quantile(1, 0.1),
                                FunctionalSpec::quantile(1, 0.9),
                                FunctionalSpec::covariance_matrix()};
  if (p >= 2) {
    s.push_back(FunctionalSpec::covariance(1, 2));
    s.push_back(FunctionalSpec::correlation(1, 2));
    s.push_back(FunctionalSpec::variance(2));
    s.push_back(FunctionalSpec::multi({FunctionalSpec::variance(2), FunctionalSpec::quantile(1, 0.25),
                                       FunctionalSpec::autocovariance(2, 2)}));
  }
  s.push_back(FunctionalSpec::multi({FunctionalSpec::mean(), FunctionalSpec::quantile(1, 0.75)}));
  return s;
}

}  // namespace

TEST(FunctionalSpec, OutputDimAndOffset) {
  EXPECT_EQ(FunctionalSpec::mean().output_dim(3), 3);
  EXPECT_EQ(FunctionalSpec::variance(2).output_dim(3), 1);
  EXPECT_EQ(FunctionalSpec::quantile(1, 0.3).output_dim(3), 1);
  EXPECT_EQ(FunctionalSpec::covariance_matrix().output_dim(4), 10);
  const auto m = FunctionalSpec::multi({FunctionalSpec::mean(), FunctionalSpec::autocovariance(1, 4),
                                        FunctionalSpec::autocorrelation(2, 2)});
  EXPECT_EQ(m.output_dim(2), 4);
  EXPECT_EQ(m.embed_offset(), 4);
  EXPECT_EQ(FunctionalSpec::mean().embed_offset(), 0);
}

TEST(FunctionalSpec, ValidateRejectsBadParameters) {
  EXPECT_THROW(FunctionalSpec::variance(3).validate(2), std::invalid_argument);
  EXPECT_THROW(FunctionalSpec::quantile(1, 0.0).validate(1), std::invalid_argument);
  EXPECT_THROW(FunctionalSpec::quantile(1, 1.0).validate(1), std::invalid_argument);
  EXPECT_THROW(FunctionalSpec::autocovariance(1, 0).validate(1), std::invalid_argument);
  EXPECT_THROW(FunctionalSpec::covariance(0, 1).validate(2), std::invalid_argument);
  EXPECT_NO_THROW(FunctionalSpec::correlation(1, 2).validate(2));
}

TEST(FunctionalSpec, TextRoundTrip) {
  for (const char* text : {"mean", "variance", "variance:2", "cov:1,2", "cor:2,1", "acov:1,3", "acor:2,1",
                           "quantile:1,0.1", "covmat", "multi:(variance:1;quantile:1,0.9;mean)"}) {
    const auto spec = parse_functional(text);
    EXPECT_EQ(parse_functional(to_string(spec)), spec) << text;
  }
  EXPECT_EQ(parse_functional("variance"), FunctionalSpec::variance(1));
  EXPECT_EQ(parse_functional("quantile:1,0.5"), FunctionalSpec::quantile(1, 0.5));
  EXPECT_THROW(parse_functional("median"), std::invalid_argument);
  EXPECT_THROW(parse_functional("cov:1"), std::invalid_argument);
  EXPECT_THROW(parse_functional("multi:(mean"), std::invalid_argument);
}

TEST(Estimator, SpecExamples) {
  const auto y = TimeSeries::univariate({1, 2, 3});
  EXPECT_DOUBLE_EQ(Estimator(y, FunctionalSpec::mean()).estimate(1, 3)[0], 2.0);
  EXPECT_NEAR(Estimator(y, FunctionalSpec::variance()).estimate(1, 3)[0], 2.0 / 3.0, 1e-14);
  const auto z = TimeSeries::univariate({3, 1, 2});
  EXPECT_EQ(Estimator(z, FunctionalSpec::quantile(1, 0.5)).estimate(1, 3)[0], 2.0);
  const auto w = TimeSeries::univariate({1, 2, 3, 4});
  EXPECT_NEAR(Estimator(w, FunctionalSpec::autocovariance(1, 1)).estimate(2, 4)[0], 2.0 / 3.0, 1e-14);
  EXPECT_NEAR(oracle::estimate(w, FunctionalSpec::autocovariance(1, 1), 2, 4)->at(0), 2.0 / 3.0, 1e-14);
}

TEST(Estimator, EffectiveRangeAndShortSeries) {
  const auto y = oracle::gaussian(10, 1, 1);
  const Estimator acov(y, FunctionalSpec::autocovariance(1, 2));
  EXPECT_EQ(acov.first_index(), 3);
  EXPECT_EQ(acov.n(), 10);
  EXPECT_EQ(Estimator(y, FunctionalSpec::mean()).first_index(), 1);
  const auto tiny = TimeSeries::univariate({1, 2, 3});
  try {
    Estimator(tiny, FunctionalSpec::autocovariance(1, 5));
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("series too short"), std::string::npos);
  }
}

TEST(Estimator, MatchesNaiveRecomputation) {
  std::mt19937_64 gen(5);
  for (int p : {1, 2, 3}) {
    const auto y = oracle::gaussian(60, p, 100 + p);
    for (const auto& spec : all_specs(p)) {
      const Estimator est(y, spec);
      for (int rep = 0; rep < 200; ++rep) {
        int a = est.first_index() + static_cast<int>(gen() % (y.n() - est.first_index() + 1));
        int b = est.first_index() + static_cast<int>(gen() % (y.n() - est.first_index() + 1));
        if (a > b) std::swap(a, b);
        std::vector<double> got(est.dim());
        const bool ok = est.estimate(a, b, got.data());
        const auto want = oracle::estimate(y, spec, a, b);
        ASSERT_EQ(ok, want.has_value()) << to_string(spec) << " [" << a << "," << b << "]";
        if (!ok) continue;
        for (int c = 0; c < est.dim(); ++c) {
          EXPECT_LE(oracle::rel_diff(got[c], (*want)[c]), 1e-9)
              << to_string(spec) << " [" << a << "," << b << "] c=" << c << " " << got[c] << " vs " << (*want)[c];
        }
      }
    }
  }
}

TEST(Estimator, SweepsMatchDirectEstimates) {
  const auto y = oracle::gaussian(40, 2, 9);
  for (const auto& spec : all_specs(2)) {
    const Estimator est(y, spec);
    const int d = est.dim();
    std::vector<double> a(d), b(d);
    for (int start : {est.first_index(), 17}) {
      ForwardSweep fw(est, start);
      for (int end = start; end <= y.n(); ++end) {
        const bool ok = fw.next(a.data());
        ASSERT_EQ(fw.end(), end);
        ASSERT_EQ(ok, est.estimate(start, end, b.data())) << to_string(spec);
        if (!ok) continue;
        for (int c = 0; c < d; ++c) EXPECT_LE(oracle::rel_diff(a[c], b[c]), 1e-12) << to_string(spec);
      }
    }
    for (int stop : {y.n(), 25}) {
      BackwardSweep bw(est, stop);
      for (int start = stop; start >= est.first_index(); --start) {
        const bool ok = bw.next(a.data());
        ASSERT_EQ(bw.start(), start);
        ASSERT_EQ(ok, est.estimate(start, stop, b.data())) << to_string(spec);
        if (!ok) continue;
        for (int c = 0; c < d; ++c) EXPECT_LE(oracle::rel_diff(a[c], b[c]), 1e-12) << to_string(spec);
      }
    }
  }
}

TEST(Estimator, MeanLinearity) {
  const auto y = oracle::gaussian(50, 2, 3);
  const Estimator est(y, FunctionalSpec::mean());
  for (int a = 1; a <= 45; a += 4) {
    for (int b = a + 1; b <= 50; b += 3) {
      for (int c = a; c < b; ++c) {
        const auto whole = est.estimate(a, b), left = est.estimate(a, c), right = est.estimate(c + 1, b);
        for (int j = 0; j < 2; ++j) {
          const double mix = ((b - c) * right[j] + (c - a + 1) * left[j]) / (b - a + 1);
          EXPECT_NEAR(whole[j], mix, 1e-12);
        }
      }
    }
  }
}

TEST(Estimator, ShiftScaleInvariance) {
  const auto y = oracle::gaussian(80, 2, 21);
  const TimeSeries shifted(y.data().array() + 37.5);
  const TimeSeries scaled(y.data() * -3.0);
  auto check = [&](const FunctionalSpec& spec, const TimeSeries& other, double factor) {
    const Estimator e0(y, spec), e1(other, spec);
    for (int a = e0.first_index(); a <= 70; a += 7) {
      for (int b = a + 3; b <= 80; b += 5) {
        const auto v0 = e0.estimate(a, b), v1 = e1.estimate(a, b);
        for (std::size_t c = 0; c < v0.size(); ++c) {
          EXPECT_LE(oracle::rel_diff(v0[c] * factor, v1[c]), 1e-10) << to_string(spec) << " " << a << "," << b;
        }
      }
    }
  };
  for (const auto& spec : {FunctionalSpec::variance(1), FunctionalSpec::covariance(1, 2),
                           FunctionalSpec::autocovariance(2, 2), FunctionalSpec::covariance_matrix()}) {
    check(spec, shifted, 1.0);
    check(spec, scaled, 9.0);
  }
  check(FunctionalSpec::mean(), scaled, -3.0);
  check(FunctionalSpec::correlation(1, 2), shifted, 1.0);
  check(FunctionalSpec::correlation(1, 2), scaled, 1.0);
  check(FunctionalSpec::autocorrelation(1, 1), scaled, 1.0);
}

TEST(Estimator, QuantileMonotoneEquivariance) {
  const auto y = oracle::gaussian(60, 1, 8);
  auto g_of = [](double x) { return std::exp(x) * 2.0 + 1.0; };
  const TimeSeries g(y.data().unaryExpr(g_of));
  for (double q : {0.1, 0.5, 0.9}) {
    const Estimator e0(y, FunctionalSpec::quantile(1, q)), e1(g, FunctionalSpec::quantile(1, q));
    for (int a = 1; a <= 60; a += 3) {
      for (int b = a; b <= 60; b += 2) {
        EXPECT_EQ(g_of(e0.estimate(a, b)[0]), e1.estimate(a, b)[0]);
      }
    }
  }
}

TEST(Estimator, QuantileRankUsesCeiling) {
  std::vector<double> v(10);
  for (int i = 0; i < 10; ++i) v[i] = 10.0 - i;
  const auto y = TimeSeries::univariate(v);
  EXPECT_EQ(Estimator(y, FunctionalSpec::quantile(1, 0.1)).estimate(1, 10)[0], 1.0);
  EXPECT_EQ(Estimator(y, FunctionalSpec::quantile(1, 0.11)).estimate(1, 10)[0], 2.0);
  EXPECT_EQ(Estimator(y, FunctionalSpec::quantile(1, 0.3)).estimate(1, 10)[0], 3.0);
  EXPECT_EQ(Estimator(y, FunctionalSpec::quantile(1, 0.99)).estimate(1, 10)[0], 10.0);
}

TEST(Estimator, CorrelationDegenerateOnConstantStretch) {
  Eigen::MatrixXd m(6, 2);
  m << 1, 5, 1, 6, 1, 2, 2, 3, 3, 1, 4, 0;
  const Estimator est(TimeSeries(m), FunctionalSpec::correlation(1, 2));
  std::vector<double> out(1);
  EXPECT_FALSE(est.estimate(1, 3, out.data()));
  EXPECT_TRUE(est.estimate(1, 5, out.data()));
}

TEST(SegmentNormalizer, ClosedFormMatchesNaiveLambda) {
  for (const auto& spec : all_specs(2)) {
    const auto y = oracle::gaussian(45, 2, 77);
    const Estimator est(y, spec);
    const int d = est.dim();
    std::vector<double> theta(d), lambda(packed_size(d));
    for (int a = est.first_index(); a <= 40; a += 6) {
      for (int b = a + 1; b <= 45; b += 5) {
        segment_normalizer(est, a, b, theta.data(), lambda.data());
        Eigen::MatrixXd want = Eigen::MatrixXd::Zero(d, d);
        const double m = b - a + 1;
        for (int i = a; i < b; ++i) {
          const auto x = oracle::estimate(y, spec, a, i), z = oracle::estimate(y, spec, i + 1, b);
          if (!x || !z) continue;
          const double w = std::pow((i - a + 1) * (b - i) / m, 2);
          const Eigen::VectorXd diff = oracle::vec(*x) - oracle::vec(*z);
          want += w * diff * diff.transpose();
        }
        for (int r = 0; r < d; ++r) {
          for (int c = r; c < d; ++c) {
            EXPECT_LE(std::abs(lambda[packed_index(r, c, d)] - want(r, c)), 1e-9 * (1.0 + want.trace()))
                << to_string(spec) << " [" << a << "," << b << "]";
          }
        }
      }
    }
  }
}

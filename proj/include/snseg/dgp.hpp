#pragma once

#include "snseg/core_types.hpp"
#include "snseg/metrics.hpp"
#include "snseg/segmentation.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace snseg {

enum class Transform { none, gpd_mixture };

// Regime r covers t in (end of regime r-1, end]:
//   X_t = A X_{t-1} + B eps_t,  eps_t ~ N(0, I_q)
//   Y_t = g(mu + C X_t + D eta_t),  eta_t ~ N(0, I_p), D empty when there is no observation noise
struct Regime {
  int end = 0;
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::VectorXd mu;
  Eigen::MatrixXd C;
  Eigen::MatrixXd D;
  Transform transform = Transform::none;
};

struct DgpPreset {
  std::string name;
  int n = 0;
  int p = 1;
  int q = 1;
  int burn_in = 500;
  std::string noise;
  std::vector<Regime> regimes;

  ChangePointSet truth() const;
  void validate() const;
};

// Named presets, optionally parameterised: "M1", "M1:d=5", "LR4:d=1", "NULL:n=1024,rho=0.5,d=1".
// M1-M5, V1, A1, R1, R2, C1, C2, Q1, MP1, MP2, MP3, LR1-LR4, NULL.
DgpPreset make_preset(std::string_view text);
std::vector<std::string> preset_names();

struct Sample {
  TimeSeries series;
  ChangePointSet truth;
};

Sample generate(const DgpPreset& preset, std::uint64_t seed);

// F(x) = Phi(x) for x <= 0 and 1 - 0.5 (1 + xi x / sigma)^(-1/xi) for x > 0, sigma = 2, xi = 0.125.
double gpd_mixture_cdf(double x);
double gpd_mixture_quantile(double q);
// F^{-1}(Phi(x)), evaluated without forming Phi(x) for x > 0.
double gpd_mixture_transform(double x);

struct MethodConfig {
  std::string label;
  DetectionConfig detection;
  bool refine = false;
};

struct ReplicationRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  std::size_t method = 0;
  std::vector<int> estimate;
  std::vector<int> refined;
  MetricsReport metrics;
  std::optional<MetricsReport> refined_metrics;
  double seconds = 0.0;
};

// Histogram bins of m_hat - m_true: <=-3, -2, -1, 0, 1, 2, >=3.
struct MethodSummary {
  std::string label;
  std::array<int, 7> histogram{};
  double correct_rate = 0.0;
  double mean_ari = 0.0;
  double mean_d1 = 0.0;
  double mean_d2 = 0.0;
  double mean_dH = 0.0;
  bool refined = false;
  double refined_mean_ari = 0.0;
  double refined_mean_d1 = 0.0;
  double refined_mean_d2 = 0.0;
  double refined_mean_dH = 0.0;
  double seconds = 0.0;
};

struct ExperimentResult {
  std::string preset;
  int reps = 0;
  std::uint64_t base_seed = 0;
  std::vector<int> truth;
  std::vector<ReplicationRecord> records;  // replication-major, then method
  std::vector<MethodSummary> summaries;
};

// Replication r draws its series with derive_seed(base_seed, r); replications run in parallel.
ExperimentResult run_experiment(const DgpPreset& preset, const std::vector<MethodConfig>& methods, int reps,
                                std::uint64_t base_seed, int threads = 0);

}  // namespace snseg

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "hsolo/bench.hpp"
#include "oracles.hpp"

namespace hsolo {
namespace {

TEST(Dbscan, TwoClusters) {
  const std::vector<double> v{1, 1.1, 1.2, 50, 51};
  const ClusterResult r = dbscan_1d(v, 0.5, 2);
  EXPECT_EQ(r.cluster_count, 1u);
  EXPECT_EQ(r.labels, (std::vector<int>{0, 0, 0, kNoiseLabel, kNoiseLabel}));
  EXPECT_EQ(r.largest_cluster_size, 3u);
  EXPECT_DOUBLE_EQ(r.success_rate, 0.6);
  ASSERT_TRUE(r.cluster_mean_error.has_value());
  EXPECT_NEAR(*r.cluster_mean_error, 1.1, 1e-12);

  // With eps wide enough to join 50 and 51 both clusters form.
  const ClusterResult wide = dbscan_1d(v, 1.0, 2);
  EXPECT_EQ(wide.cluster_count, 2u);
  EXPECT_EQ(wide.labels, (std::vector<int>{0, 0, 0, 1, 1}));
  EXPECT_EQ(wide.largest_label, 0);
}

TEST(Dbscan, IdenticalValuesFormOneCluster) {
  const std::vector<double> v(17, 3.25);
  const ClusterResult r = dbscan_1d(v, 0.5, 5);
  EXPECT_EQ(r.cluster_count, 1u);
  EXPECT_EQ(r.success_rate, 1.0);
  EXPECT_EQ(*r.cluster_mean_error, 3.25);
}

TEST(Dbscan, SparseValuesAreNoise) {
  const std::vector<double> v{0, 10, 20, 30};
  const ClusterResult r = dbscan_1d(v, 0.5, 2);
  EXPECT_EQ(r.cluster_count, 0u);
  EXPECT_EQ(r.success_rate, 0.0);
  EXPECT_FALSE(r.cluster_mean_error.has_value());
  for (int l : r.labels) EXPECT_EQ(l, kNoiseLabel);
}

TEST(Dbscan, EqualSizeTieGoesToLowerMean) {
  const std::vector<double> v{9, 9.1, 9.2, 1, 1.1, 1.2};
  const ClusterResult r = dbscan_1d(v, 0.5, 2);
  EXPECT_EQ(r.largest_label, 0);
  EXPECT_NEAR(*r.cluster_mean_error, 1.1, 1e-12);
}

TEST(Dbscan, MatchesBruteForceOracle) {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> size(1, 50), grid(0, 60), min_pts(1, 6);
  std::uniform_real_distribution<double> continuous(0.0, 10.0);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(size(rng)));
    // Half the cases on a coarse grid to create duplicates and ties.
    for (double& x : v) x = trial % 2 ? 0.1 * grid(rng) : continuous(rng);
    const double eps = trial % 2 ? 0.25 : 0.4;
    const auto m = static_cast<std::size_t>(min_pts(rng));
    const ClusterResult r = dbscan_1d(v, eps, m);
    EXPECT_EQ(r.labels, oracle::dbscan(v, eps, m)) << "trial " << trial;
  }
}

TEST(Dbscan, ValidatesArguments) {
  const std::vector<double> v{1.0};
  EXPECT_THROW(dbscan_1d(std::vector<double>{}, 0.5, 2), InsufficientData);
  EXPECT_THROW(dbscan_1d(v, 0.0, 2), InvalidArgument);
  EXPECT_THROW(dbscan_1d(v, 0.5, 0), InvalidArgument);
}

// Direct evaluation of ceil(log(1 - p) / log(1 - w^n)); log1p keeps tiny w^n accurate.
double scalar_iterations(double w, int n, double p) { return std::ceil(std::log(1.0 - p) / std::log1p(-std::pow(w, n))); }

TEST(Theory, PublishedIterationCount) {
  const std::vector<double> w{0.03};
  const std::vector<std::size_t> n{4};
  const auto rows = theory_curves(w, n, 0.95, 21, 0.7);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_GE(rows[0].k_ransac, 3'600'000u);
  EXPECT_LE(rows[0].k_ransac, 3'800'000u);
  EXPECT_GT(rows[0].speedup, 1.0);
}

TEST(Theory, RansacWinsNearFullInlierRate) {
  const std::vector<double> w{0.95, 0.99, 1.0};
  const std::vector<std::size_t> n{4};
  for (const auto& row : theory_curves(w, n, 0.95, 21, 0.7)) EXPECT_LT(row.speedup, 1.0) << "w=" << row.w;
}

TEST(Theory, MatchesScalarFormula) {
  std::vector<double> w;
  for (int i = 1; i < 100; ++i) w.push_back(i / 100.0);
  const std::vector<std::size_t> n{2, 3, 4, 5, 8};
  const double log_nf = std::log(21.0);
  const double inner = scalar_iterations(0.7, 4, 0.95);
  for (const auto& row : theory_curves(w, n, 0.95, 21, 0.7)) {
    EXPECT_NEAR(static_cast<double>(row.k_ransac), scalar_iterations(row.w, static_cast<int>(row.n), 0.95), 1.0);
    EXPECT_NEAR(static_cast<double>(row.k_hsolo), scalar_iterations(row.w, 1, 0.95), 1.0);
    EXPECT_NEAR(static_cast<double>(row.k_hsolo_inner), inner, 1.0);
    const double cost = scalar_iterations(row.w, 1, 0.95) * (log_nf + inner);
    EXPECT_NEAR(row.hsolo_cost, cost, 1e-9 * cost + log_nf + inner);
  }
}

TEST(Theory, CsvHasHeaderAndRows) {
  const std::vector<double> w{0.1, 0.5};
  const std::vector<std::size_t> n{4};
  std::ostringstream out;
  write_theory_csv(out, theory_curves(w, n, 0.95, 21, 0.7));
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("w,n,k_ransac,", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(DeriveSeed, DistinctAcrossComponents) {
  EXPECT_EQ(derive_seed(1, 2, 3, 4), derive_seed(1, 2, 3, 4));
  EXPECT_NE(derive_seed(1, 2, 3, 4), derive_seed(1, 2, 3, 5));
  EXPECT_NE(derive_seed(1, 2, 3, 4), derive_seed(1, 2, 4, 4));
  EXPECT_NE(derive_seed(1, 2, 3, 4), derive_seed(1, 3, 3, 4));
  EXPECT_NE(derive_seed(1, 2, 3, 4), derive_seed(2, 2, 3, 4));
}

BenchConfig small_config() {
  BenchConfig config;
  config.inlier_rates = {0.2, 0.4};
  config.trials = 6;
  config.seed = 17;
  config.scene.truth = default_truth();
  config.scene.n_total = 200;
  config.scene.pixel_noise_sigma = 0.5;
  config.ransac.max_iterations = 2000;
  config.hsolo.max_outer_iterations = 2000;
  config.hsolo.max_inner_iterations = 2000;
  config.record_timing = false;
  return config;
}

TEST(Benchmark, HighInlierRateBothSucceed) {
  const BenchReport report = run_benchmark(small_config());
  EXPECT_EQ(report.records.size(), 2u * 6u * 2u);
  EXPECT_TRUE(report.warnings.empty());
  ASSERT_EQ(report.summary.size(), 4u);
  for (const auto& row : report.summary) {
    EXPECT_EQ(row.trials, 6u);
    if (row.w_target == 0.4) {
      EXPECT_EQ(row.successes, 6u) << method_name(row.method);
    }
  }
  for (const auto& r : report.records) {
    EXPECT_EQ(r.elapsed, 0.0);
    EXPECT_NEAR(r.w_true, r.w_target, 1e-12);
  }
}

TEST(Benchmark, ThreadCountDoesNotChangeOutput) {
  BenchConfig config = small_config();
  std::ostringstream one, many;
  config.threads = 1;
  const BenchReport a = run_benchmark(config);
  write_records_csv(one, a.records);
  write_summary_csv(one, a.summary);
  config.threads = 4;
  const BenchReport b = run_benchmark(config);
  write_records_csv(many, b.records);
  write_summary_csv(many, b.summary);
  EXPECT_EQ(one.str(), many.str());
}

TEST(Benchmark, InfeasibleRateSkipsHsolo) {
  BenchConfig config = small_config();
  config.inlier_rates = {0.03};
  config.trials = 3;
  const BenchReport report = run_benchmark(config);
  ASSERT_EQ(report.warnings.size(), 1u);
  for (const auto& r : report.records) EXPECT_EQ(r.skipped, r.method == Method::kHsolo);
}

TEST(Benchmark, FileModeUsesFlaggedInliers) {
  SceneSpec spec;
  spec.truth = default_truth();
  spec.n_total = 200;
  spec.inlier_rate = 0.3;
  spec.seed = 5;
  const Scene scene = generate_scene(spec);
  CorrespondenceSet data{scene.correspondences, scene.inlier_mask, true};
  BenchConfig config = small_config();
  config.trials = 4;
  const BenchReport report = run_benchmark(data, config);
  EXPECT_EQ(report.records.size(), 8u);
  for (const auto& r : report.records) {
    EXPECT_TRUE(r.success) << method_name(r.method);
    EXPECT_NEAR(r.w_true, 0.3, 1e-12);
  }

  data.has_byproducts = false;
  EXPECT_THROW(run_benchmark(data, config), InvalidArgument);
  config.methods = {Method::kRansac};
  EXPECT_NO_THROW(run_benchmark(data, config));
}

}  // namespace
}  // namespace hsolo

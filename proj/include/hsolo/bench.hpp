#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"
#include "hsolo/hsolo.hpp"
#include "hsolo/io.hpp"
#include "hsolo/robust.hpp"
#include "hsolo/synthetic.hpp"

namespace hsolo {

// ---------------------------------------------------------------------------
// Density clustering on the real line

inline constexpr int kNoiseLabel = -1;

struct ClusterResult {
  std::vector<int> labels;  // per input value; kNoiseLabel for noise
  std::size_t cluster_count = 0;
  int largest_label = kNoiseLabel;
  std::size_t largest_cluster_size = 0;
  double success_rate = 0.0;
  std::optional<double> cluster_mean_error;  // mean of the largest cluster
};

/// DBSCAN over scalars. A value is a core point when at least `min_pts`
/// values (itself included) lie within `eps`. Cores closer than `eps` share a
/// cluster; a non-core value within `eps` of a core joins the cluster of its
/// nearest core (the lower one on a tie). Clusters are numbered by ascending
/// value. The largest cluster wins, ties going to the lower mean.
inline ClusterResult dbscan_1d(std::span<const double> values, double eps, std::size_t min_pts) {
  if (values.empty()) throw InsufficientData("dbscan_1d needs at least one value");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  if (min_pts < 1) throw InvalidArgument("min_pts must be at least 1");

  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = values[order[i]];

  std::vector<bool> core(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const auto lo = std::lower_bound(sorted.begin(), sorted.end(), sorted[i] - eps);
    const auto hi = std::upper_bound(sorted.begin(), sorted.end(), sorted[i] + eps);
    core[i] = static_cast<std::size_t>(hi - lo) >= min_pts;
  }

  std::vector<int> sorted_labels(n, kNoiseLabel);
  int next_label = -1;
  std::optional<std::size_t> prev_core;
  std::vector<std::size_t> cores;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i]) continue;
    if (!prev_core || sorted[i] - sorted[*prev_core] > eps) ++next_label;
    sorted_labels[i] = next_label;
    prev_core = i;
    cores.push_back(i);
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (core[i] || cores.empty()) continue;
    // Nearest cores below and above in sorted order.
    const auto it = std::lower_bound(cores.begin(), cores.end(), i);
    double best = std::numeric_limits<double>::infinity();
    int label = kNoiseLabel;
    if (it != cores.begin()) {
      const std::size_t c = *(it - 1);
      best = sorted[i] - sorted[c];
      label = sorted_labels[c];
    }
    if (it != cores.end()) {
      const std::size_t c = *it;
      const double d = sorted[c] - sorted[i];
      if (d < best) {
        best = d;
        label = sorted_labels[c];
      }
    }
    if (best <= eps) sorted_labels[i] = label;
  }

  ClusterResult result;
  result.labels.assign(n, kNoiseLabel);
  for (std::size_t i = 0; i < n; ++i) result.labels[order[i]] = sorted_labels[i];
  result.cluster_count = static_cast<std::size_t>(next_label + 1);

  std::vector<std::size_t> sizes(result.cluster_count, 0);
  std::vector<double> sums(result.cluster_count, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (sorted_labels[i] == kNoiseLabel) continue;
    ++sizes[static_cast<std::size_t>(sorted_labels[i])];
    sums[static_cast<std::size_t>(sorted_labels[i])] += sorted[i];
  }
  for (std::size_t c = 0; c < result.cluster_count; ++c) {
    const double mean = sums[c] / static_cast<double>(sizes[c]);
    if (sizes[c] > result.largest_cluster_size ||
        (sizes[c] == result.largest_cluster_size && mean < *result.cluster_mean_error)) {
      result.largest_cluster_size = sizes[c];
      result.largest_label = static_cast<int>(c);
      result.cluster_mean_error = mean;
    }
  }
  result.success_rate = static_cast<double>(result.largest_cluster_size) / static_cast<double>(n);
  return result;
}

// ---------------------------------------------------------------------------
// Theoretical iteration counts

struct TheoryRow {
  double w = 0.0;
  std::size_t n = 4;
  std::uint64_t k_ransac = 0;       // samples of size n at rate w
  std::uint64_t k_hsolo = 0;        // single-correspondence outer iterations
  std::uint64_t k_hsolo_inner = 0;  // 4-point iterations at rate w_f
  double hsolo_cost = 0.0;          // k_hsolo * (log(n_f) + k_hsolo_inner)
  double speedup = 0.0;             // k_ransac / hsolo_cost
};

inline constexpr std::uint64_t kTheoryCap = 1'000'000'000'000'000'000ULL;

inline std::vector<TheoryRow> theory_curves(std::span<const double> w_values, std::span<const std::size_t> n_values,
                                            double p, std::size_t n_f, double w_f) {
  if (n_f < 1) throw InvalidArgument("n_f must be positive");
  const std::uint64_t inner = required_iterations(w_f, 4, p, kTheoryCap);
  std::vector<TheoryRow> rows;
  rows.reserve(w_values.size() * n_values.size());
  for (double w : w_values) {
    const std::uint64_t outer = required_iterations(w, 1, p, kTheoryCap);
    const double cost = static_cast<double>(outer) * (std::log(static_cast<double>(n_f)) + static_cast<double>(inner));
    for (std::size_t n : n_values) {
      TheoryRow row;
      row.w = w;
      row.n = n;
      row.k_ransac = required_iterations(w, n, p, kTheoryCap);
      row.k_hsolo = outer;
      row.k_hsolo_inner = inner;
      row.hsolo_cost = cost;
      row.speedup = static_cast<double>(row.k_ransac) / cost;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_theory_csv(std::ostream& out, std::span<const TheoryRow> rows) {
  out << "w,n,k_ransac,k_hsolo,k_hsolo_inner,hsolo_cost,speedup\n";
  for (const auto& r : rows) {
    out << detail::format_double(r.w) << ',' << r.n << ',' << r.k_ransac << ',' << r.k_hsolo << ',' << r.k_hsolo_inner
        << ',' << detail::format_double(r.hsolo_cost) << ',' << detail::format_double(r.speedup) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Benchmark harness

enum class Method { kHsolo, kRansac };

inline std::string_view method_name(Method m) { return m == Method::kHsolo ? "hsolo" : "ransac"; }

struct TrialRecord {
  Method method = Method::kHsolo;
  double w_target = 0.0;
  double w_true = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  bool skipped = false;  // infeasible: true inliers / n_f < w_f
  bool success = false;
  double mean_reproj_error = std::numeric_limits<double>::infinity();
  std::size_t support = 0;
  std::uint64_t iterations = 0;
  std::uint64_t inner_iterations = 0;
  double elapsed = 0.0;
};

struct SummaryRow {
  Method method = Method::kHsolo;
  double w_target = 0.0;
  std::size_t trials = 0;
  std::size_t skipped = 0;
  std::size_t successes = 0;
  double success_rate = 0.0;  // over non-skipped trials
  double median_iterations = 0.0;
  double median_elapsed = 0.0;
  std::optional<double> mean_error_success;
  double cluster_success_rate = 0.0;
  std::optional<double> cluster_mean_error;
};

struct BenchConfig {
  std::vector<double> inlier_rates{0.03, 0.05, 0.10, 0.20, 0.40};
  std::vector<Method> methods{Method::kHsolo, Method::kRansac};
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  SceneSpec scene;  // truth, bounds, size and noise; rate and seed are overridden
  HsoloConfig hsolo;
  RansacConfig ransac;
  double success_threshold = 2.0;  // pixels
  std::size_t threads = 1;
  bool record_timing = true;
  double dbscan_eps = 0.5;
  std::size_t dbscan_min_pts = 0;  // 0: max(5, 2% of trials)
};

struct BenchReport {
  std::vector<TrialRecord> records;  // ordered by (rate, trial, method)
  std::vector<SummaryRow> summary;   // ordered by (method, rate)
  std::vector<std::string> warnings;
};

// Independent 64-bit seed for one (rate, trial, stream) triple.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t rate_index, std::uint64_t trial, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(rate_index), static_cast<std::uint32_t>(trial),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace detail {

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return sorted_median(v);
}

// Runs `job(i)` for i in [0, count) on up to `threads` workers.
template <typename Job>
void parallel_for(std::size_t count, std::size_t threads, Job&& job) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count && !failed; i = next++) {
        try {
          job(i);
        } catch (...) {
          if (!failed.exchange(true)) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// Mean distance between the estimate's and the reference's projections of
// the ground-truth inlier sources.
inline double mean_error_against(const Homography& estimate, std::span<const Correspondence> reference_pairs) {
  if (reference_pairs.empty()) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (const auto& c : reference_pairs) sum += reprojection_error_or_inf(estimate, c);
  return sum / static_cast<double>(reference_pairs.size());
}

struct Workload {
  std::span<const Correspondence> pool;
  std::span<const Correspondence> reference;  // held-out ground truth pairs
};

inline TrialRecord run_method(Method method, const Workload& work, const BenchConfig& config, std::uint64_t seed) {
  TrialRecord rec;
  rec.method = method;
  rec.seed = seed;
  try {
    EstimationResult r;
    if (method == Method::kHsolo) {
      HsoloConfig hc = config.hsolo;
      hc.seed = seed;
      r = hsolo_estimate(work.pool, hc);
    } else {
      RansacConfig rc = config.ransac;
      rc.seed = seed;
      r = ransac_homography(work.pool, work.pool, 1.0 / static_cast<double>(work.pool.size()), rc);
    }
    rec.support = r.support;
    rec.iterations = r.iterations_run;
    rec.inner_iterations = r.inner_iterations;
    rec.elapsed = config.record_timing ? r.elapsed : 0.0;
    rec.mean_reproj_error = mean_error_against(r.model, work.reference);
    rec.success = rec.mean_reproj_error < config.success_threshold;
  } catch (const NoModelFound&) {
    rec.success = false;
  }
  return rec;
}

inline std::vector<SummaryRow> summarize(const std::vector<TrialRecord>& records, const BenchConfig& config) {
  std::map<std::pair<int, double>, std::vector<const TrialRecord*>> groups;
  for (const auto& r : records) groups[{static_cast<int>(r.method), r.w_target}].push_back(&r);

  std::vector<SummaryRow> rows;
  for (const auto& [key, group] : groups) {
    SummaryRow row;
    row.method = static_cast<Method>(key.first);
    row.w_target = key.second;
    std::vector<double> iterations, elapsed, errors;
    double success_error_sum = 0.0;
    for (const TrialRecord* r : group) {
      ++row.trials;
      if (r->skipped) {
        ++row.skipped;
        continue;
      }
      iterations.push_back(static_cast<double>(r->iterations));
      elapsed.push_back(r->elapsed);
      errors.push_back(std::isfinite(r->mean_reproj_error) ? r->mean_reproj_error : std::numeric_limits<double>::max());
      if (r->success) {
        ++row.successes;
        success_error_sum += r->mean_reproj_error;
      }
    }
    const std::size_t ran = row.trials - row.skipped;
    if (ran > 0) {
      row.success_rate = static_cast<double>(row.successes) / static_cast<double>(ran);
      row.median_iterations = median_of(iterations);
      row.median_elapsed = median_of(elapsed);
      if (row.successes > 0) row.mean_error_success = success_error_sum / static_cast<double>(row.successes);
      const std::size_t min_pts = config.dbscan_min_pts > 0
                                      ? config.dbscan_min_pts
                                      : std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(0.02 * static_cast<double>(ran))));
      const ClusterResult clusters = dbscan_1d(errors, config.dbscan_eps, min_pts);
      row.cluster_success_rate = clusters.success_rate;
      row.cluster_mean_error = clusters.cluster_mean_error;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace detail

/// Synthetic sweep: for every inlier rate and trial a fresh scene is drawn
/// and each method runs on it. Success means the estimate reprojects the
/// ground-truth inlier sources within `success_threshold` pixels (mean) of
/// where the true homography puts them. HSolo runs are skipped, with a
/// warning, at rates whose inlier count c violates c / n_f >= w_f.
inline BenchReport run_benchmark(const BenchConfig& config) {
  if (config.trials < 1) throw InvalidArgument("trials must be at least 1");
  config.hsolo.validate();
  config.ransac.validate();
  BenchReport report;

  const std::size_t n_methods = config.methods.size();
  const std::size_t jobs = config.inlier_rates.size() * config.trials;
  report.records.resize(jobs * n_methods);

  std::vector<bool> infeasible(config.inlier_rates.size(), false);
  for (std::size_t ri = 0; ri < config.inlier_rates.size(); ++ri) {
    const double w = config.inlier_rates[ri];
    const double c = std::round(static_cast<double>(config.scene.n_total) * w);
    if (c / static_cast<double>(config.hsolo.n_f) < config.hsolo.w_f) {
      infeasible[ri] = true;
      report.warnings.push_back("skipping hsolo at w=" + detail::format_double(w) + ": " + std::to_string(static_cast<long long>(c)) +
                                " inliers / n_f=" + std::to_string(config.hsolo.n_f) + " is below w_f");
    }
  }

  detail::parallel_for(jobs, config.threads, [&](std::size_t job) {
    const std::size_t ri = job / config.trials;
    const std::size_t trial = job % config.trials;
    const double w = config.inlier_rates[ri];

    SceneSpec spec = config.scene;
    spec.inlier_rate = w;
    spec.seed = derive_seed(config.seed, ri, trial, 0);

    const Scene scene = generate_scene(spec);
    std::vector<Correspondence> reference;
    for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
      if (!scene.inlier_mask[i]) continue;
      const Point2 src = scene.correspondences[i].a.point();
      reference.push_back(make_correspondence(src, project(spec.truth, src)));
    }
    const double w_true = static_cast<double>(reference.size()) / static_cast<double>(scene.correspondences.size());

    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      TrialRecord rec;
      const std::uint64_t seed = derive_seed(config.seed, ri, trial, 1 + mi);
      if (infeasible[ri] && config.methods[mi] == Method::kHsolo) {
        rec.method = config.methods[mi];
        rec.seed = seed;
        rec.skipped = true;
      } else {
        rec = detail::run_method(config.methods[mi], {scene.correspondences, reference}, config, seed);
      }
      rec.w_target = w;
      rec.w_true = w_true;
      rec.trial = trial;
      report.records[job * n_methods + mi] = rec;
    }
  });

  report.summary = detail::summarize(report.records, config);
  return report;
}

/// Same harness over a loaded correspondence file. Trials differ only in
/// the estimator seed. With an inlier column, success is judged against the
/// flagged correspondences; without one, only the clustering columns of the
/// summary are meaningful.
inline BenchReport run_benchmark(const CorrespondenceSet& data, const BenchConfig& config) {
  if (config.trials < 1) throw InvalidArgument("trials must be at least 1");
  if (data.items.size() < 5) throw InsufficientData("benchmark input needs at least 5 correspondences");
  for (Method m : config.methods) {
    if (m == Method::kHsolo && !data.has_byproducts) {
      throw InvalidArgument("hsolo needs scale and angle columns; point-only inputs support --methods ransac");
    }
  }
  BenchReport report;
  std::vector<Correspondence> reference;
  if (data.inlier_mask) {
    for (std::size_t i = 0; i < data.items.size(); ++i) {
      if ((*data.inlier_mask)[i]) reference.push_back(data.items[i]);
    }
  }
  const double w_true = data.inlier_mask ? static_cast<double>(reference.size()) / static_cast<double>(data.items.size()) : 0.0;
  bool infeasible = false;
  if (data.inlier_mask &&
      static_cast<double>(reference.size()) / static_cast<double>(config.hsolo.n_f) < config.hsolo.w_f) {
    infeasible = true;
    report.warnings.push_back("skipping hsolo: " + std::to_string(reference.size()) + " inliers / n_f=" +
                              std::to_string(config.hsolo.n_f) + " is below w_f");
  }

  const std::size_t n_methods = config.methods.size();
  report.records.resize(config.trials * n_methods);
  detail::parallel_for(config.trials, config.threads, [&](std::size_t trial) {
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
      TrialRecord rec;
      const std::uint64_t seed = derive_seed(config.seed, 0, trial, 1 + mi);
      if (infeasible && config.methods[mi] == Method::kHsolo) {
        rec.method = config.methods[mi];
        rec.seed = seed;
        rec.skipped = true;
      } else {
        rec = detail::run_method(config.methods[mi], {data.items, reference}, config, seed);
      }
      rec.w_target = w_true;
      rec.w_true = w_true;
      rec.trial = trial;
      report.records[trial * n_methods + mi] = rec;
    }
  });
  report.summary = detail::summarize(report.records, config);
  return report;
}

inline void write_records_csv(std::ostream& out, std::span<const TrialRecord> records) {
  out << "method,w_target,w_true,trial,seed,skipped,success,mean_reproj_error,support,iterations,inner_iterations,elapsed_s\n";
  for (const auto& r : records) {
    out << method_name(r.method) << ',' << detail::format_double(r.w_target) << ',' << detail::format_double(r.w_true) << ','
        << r.trial << ',' << r.seed << ',' << (r.skipped ? 1 : 0) << ',' << (r.success ? 1 : 0) << ','
        << detail::format_double(r.mean_reproj_error) << ',' << r.support << ',' << r.iterations << ','
        << r.inner_iterations << ',' << detail::format_double(r.elapsed) << '\n';
  }
}

inline void write_summary_csv(std::ostream& out, std::span<const SummaryRow> rows) {
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_double(*v) : std::string("nan"); };
  out << "method,w_target,trials,skipped,successes,success_rate,median_iterations,median_elapsed_s,"
         "mean_error_success,cluster_success_rate,cluster_mean_error\n";
  for (const auto& r : rows) {
    out << method_name(r.method) << ',' << detail::format_double(r.w_target) << ',' << r.trials << ',' << r.skipped << ','
        << r.successes << ',' << detail::format_double(r.success_rate) << ',' << detail::format_double(r.median_iterations)
        << ',' << detail::format_double(r.median_elapsed) << ',' << opt(r.mean_error_success) << ','
        << detail::format_double(r.cluster_success_rate) << ',' << opt(r.cluster_mean_error) << '\n';
  }
}

}  // namespace hsolo

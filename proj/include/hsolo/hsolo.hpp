#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"
#include "hsolo/refine.hpp"
#include "hsolo/robust.hpp"
#include "hsolo/solvers.hpp"

namespace hsolo {

// Defaults are the published parameterization.
struct HsoloConfig {
  std::size_t n_f = 21;       // filtered set size
  double w_f = 0.7;           // assumed inlier rate of the filtered set
  double epsilon_r = 20.0;    // median-error gate, pixels
  double epsilon = 4.0;       // support threshold, pixels
  double p = 0.95;
  std::uint64_t seed = 0;
  double inlier_scaling = 0.7;  // applied to w when sizing the outer loop
  std::uint64_t max_outer_iterations = kDefaultMaxIterations;
  std::uint64_t max_inner_iterations = kDefaultMaxIterations;

  void validate() const {
    if (n_f < 5) throw InvalidArgument("n_f must be at least 5");
    if (!(w_f > 0.0 && w_f < 1.0)) throw InvalidArgument("w_f must lie in (0, 1)");
    if (!(epsilon_r > 0.0)) throw InvalidArgument("epsilon_r must be positive");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("p must lie in (0, 1)");
    if (!(inlier_scaling > 0.0 && inlier_scaling <= 1.0)) throw InvalidArgument("inlier_scaling must lie in (0, 1]");
    if (max_outer_iterations < 1 || max_inner_iterations < 1) throw InvalidArgument("iteration caps must be positive");
  }
};

struct FilteredSet {
  std::vector<std::size_t> indices;  // into the pool
  std::vector<double> errors;        // ascending
  double median_error = 0.0;
};

// Median of an ascending list; even sizes average the two middle values.
inline double sorted_median(std::span<const double> sorted) {
  if (sorted.empty()) throw InsufficientData("median of an empty list");
  const std::size_t mid = sorted.size() / 2;
  if (sorted.size() % 2 == 1) return sorted[mid];
  return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

/// The n_f pool members with the smallest reprojection error under `model`,
/// ascending, ties broken by pool index. Bounded max-heap, O(n log n_f).
inline FilteredSet filter_by_model(const Homography& model, std::span<const Correspondence> pool, std::size_t n_f) {
  if (pool.empty()) throw InsufficientData("cannot filter an empty pool");
  if (n_f == 0) throw InvalidArgument("n_f must be positive");
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry> heap;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const Entry e{reprojection_error_or_inf(model, pool[i]), i};
    if (heap.size() < n_f) {
      heap.push(e);
    } else if (e < heap.top()) {
      heap.pop();
      heap.push(e);
    }
  }
  FilteredSet fs;
  fs.indices.resize(heap.size());
  fs.errors.resize(heap.size());
  for (std::size_t k = heap.size(); k-- > 0;) {
    fs.errors[k] = heap.top().first;
    fs.indices[k] = heap.top().second;
    heap.pop();
  }
  fs.median_error = sorted_median(fs.errors);
  return fs;
}

inline bool median_gate(const FilteredSet& fs, double epsilon_r) { return fs.median_error <= epsilon_r; }

// Percentile of an ascending list with linear interpolation between ranks.
inline double interpolated_percentile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InsufficientData("percentile of an empty list");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Outlier upper bound Q3 + 3 * (Q3 - Q1) of a list of errors.
inline double estimate_epsilon_r(std::span<const double> errors) {
  if (errors.size() < 4) throw InsufficientData("estimate_epsilon_r needs at least 4 samples");
  std::vector<double> sorted(errors.begin(), errors.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = interpolated_percentile(sorted, 0.25);
  const double q3 = interpolated_percentile(sorted, 0.75);
  return q3 + 3.0 * (q3 - q1);
}

// Per-outer-iteration report handed to an optional observer.
struct OuterIteration {
  std::uint64_t iteration = 0;  // 1-based
  std::size_t pool_index = 0;   // correspondence that seeded this iteration
  double median_error = 0.0;
  bool gate_passed = false;
  std::optional<Homography> candidate;  // inner RANSAC output, if any
  std::size_t candidate_support = 0;
  bool improved = false;
  std::uint64_t k = 0;  // outer budget after this iteration
};

// Return true to stop the outer loop early.
using HsoloObserver = std::function<bool(const OuterIteration&)>;

/// Single-correspondence initialized robust homography estimation.
///
/// Visits the pool in a seeded random order. Each visited correspondence
/// yields an affine estimate, which picks the n_f best-agreeing candidates;
/// when their median error passes the gate, a 4-point RANSAC samples from
/// them while counting support over the whole pool. The outer budget is
/// recomputed from the best support (scaled by inlier_scaling) and the loop
/// ends at min(k, pool size, max_outer_iterations). The winner is refined
/// over its inliers.
inline EstimationResult hsolo_estimate(std::span<const Correspondence> pool, const HsoloConfig& config,
                                       const HsoloObserver& observer = {}) {
  config.validate();
  if (pool.size() < 5) throw InsufficientData("hsolo needs at least 5 correspondences");
  const auto start = std::chrono::steady_clock::now();
  const double pool_size = static_cast<double>(pool.size());

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::uint64_t k = required_iterations(config.inlier_scaling / pool_size, 1, config.p, config.max_outer_iterations);
  const std::uint64_t hard_cap = std::min<std::uint64_t>(pool.size(), config.max_outer_iterations);

  RansacConfig inner;
  inner.epsilon = config.epsilon;
  inner.p = config.p;
  inner.sample_size = 4;
  inner.max_iterations = config.max_inner_iterations;

  std::optional<EstimationResult> best;
  std::uint64_t iteration = 0;
  std::uint64_t inner_total = 0;
  std::vector<Correspondence> filtered;

  while (iteration < std::min(k, hard_cap)) {
    const std::size_t seed_index = order[iteration];
    ++iteration;
    inner.seed = rng();

    OuterIteration report;
    report.iteration = iteration;
    report.pool_index = seed_index;

    const Homography affine = single_match_homography(pool[seed_index]);
    const FilteredSet fs = filter_by_model(affine, pool, config.n_f);
    report.median_error = fs.median_error;
    report.gate_passed = median_gate(fs, config.epsilon_r) && fs.indices.size() >= 4;

    if (report.gate_passed) {
      filtered.clear();
      for (std::size_t i : fs.indices) filtered.push_back(pool[i]);
      try {
        EstimationResult candidate = ransac_homography(filtered, pool, config.w_f, inner);
        inner_total += candidate.iterations_run;
        report.candidate = candidate.model;
        report.candidate_support = candidate.support;
        if (!best || candidate.support > best->support) {
          report.improved = true;
          best = std::move(candidate);
          const double w = static_cast<double>(best->support) / pool_size;
          k = required_iterations(std::min(1.0, w * config.inlier_scaling), 1, config.p, config.max_outer_iterations);
        }
      } catch (const NoModelFound&) {
      }
    }
    report.k = k;
    if (observer && observer(report)) break;
  }

  if (!best) throw NoModelFound("no outer iteration produced a model");

  std::vector<Correspondence> inliers;
  inliers.reserve(best->support);
  for (std::size_t i : best->inlier_indices) inliers.push_back(pool[i]);
  const RefineResult refined = refine_model(best->model, inliers);

  EstimationResult result = std::move(*best);
  auto refined_inliers = detail::collect_inliers(refined.model.matrix(), pool, config.epsilon);
  if (refined_inliers.size() >= 4) {
    result.model = refined.model;
    result.inlier_indices = std::move(refined_inliers);
    result.support = result.inlier_indices.size();
  }
  result.refinement_degraded = refined.degraded;
  result.iterations_run = iteration;
  result.k_final = k;
  result.inner_iterations = inner_total;
  result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace hsolo

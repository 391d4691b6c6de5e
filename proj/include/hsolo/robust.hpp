#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"
#include "hsolo/solvers.hpp"

namespace hsolo {

inline constexpr std::uint64_t kDefaultMaxIterations = 10'000'000;

struct RansacConfig {
  double epsilon = 4.0;  // inlier threshold, pixels
  double p = 0.95;       // target probability of drawing one all-inlier sample
  std::size_t sample_size = 4;
  std::uint64_t max_iterations = kDefaultMaxIterations;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("p must lie in (0, 1)");
    if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (sample_size < 4) throw InvalidArgument("sample_size must be at least 4");
    if (max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
  }
};

struct EstimationResult {
  Homography model;
  std::vector<std::size_t> inlier_indices;  // ascending, into the scoring pool
  std::size_t support = 0;
  std::uint64_t iterations_run = 0;
  std::uint64_t k_final = 0;
  double elapsed = 0.0;  // seconds
  // Only filled by the HSolo estimator.
  std::uint64_t inner_iterations = 0;
  bool refinement_degraded = false;
};

/// Number of samples needed so that, with probability p, at least one
/// sample of size n is outlier-free at inlier rate w. Clamped to [1, cap].
inline std::uint64_t required_iterations(double w, std::size_t n, double p, std::uint64_t cap = kDefaultMaxIterations) {
  if (!(w > 0.0 && w <= 1.0)) throw InvalidArgument("inlier rate must lie in (0, 1]");
  if (n < 1) throw InvalidArgument("sample size must be at least 1");
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("p must lie in (0, 1)");
  cap = std::max<std::uint64_t>(cap, 1);
  if (w == 1.0) return 1;
  const double wn = std::pow(w, static_cast<double>(n));
  if (!(wn > 0.0)) return cap;
  const double k = std::ceil(std::log1p(-p) / std::log1p(-wn));
  if (!(k < static_cast<double>(cap))) return cap;
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(k));
}

namespace detail {

inline std::vector<std::size_t> collect_inliers(const Eigen::Matrix3d& m, std::span<const Correspondence> pool, double epsilon) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (reprojection_error_or_inf(m, pool[i]) <= epsilon) out.push_back(i);
  }
  return out;
}

inline std::size_t count_inliers(const Eigen::Matrix3d& m, std::span<const Correspondence> pool, double epsilon) {
  std::size_t count = 0;
  for (const auto& c : pool) {
    if (reprojection_error_or_inf(m, c) <= epsilon) ++count;
  }
  return count;
}

}  // namespace detail

/// RANSAC over 4-point DLT samples drawn from `sample_pool`, with support
/// counted over `score_pool`.
///
/// The iteration budget starts at required_iterations(w_init) and is lowered
/// whenever the best model improves, using the fraction of `sample_pool` it
/// explains; it never rises. Degenerate samples consume an iteration. Ties in
/// support keep the earlier model. The winner is refit on all its inliers and
/// the refit is kept unless it loses support.
inline EstimationResult ransac_homography(std::span<const Correspondence> sample_pool,
                                          std::span<const Correspondence> score_pool, double w_init,
                                          const RansacConfig& config) {
  config.validate();
  const std::size_t n = config.sample_size;
  if (sample_pool.size() < n) throw InsufficientData("sample pool smaller than the sample size");
  if (!(w_init > 0.0 && w_init <= 1.0)) throw InvalidArgument("w_init must lie in (0, 1]");

  const auto start = std::chrono::steady_clock::now();
  const bool same_pool = sample_pool.data() == score_pool.data() && sample_pool.size() == score_pool.size();

  std::mt19937_64 rng(config.seed);
  std::uniform_int_distribution<std::size_t> pick(0, sample_pool.size() - 1);

  std::uint64_t k = required_iterations(w_init, n, config.p, config.max_iterations);
  std::uint64_t iterations = 0;
  std::size_t best_support = 0;
  Eigen::Matrix3d best_model;
  std::vector<std::size_t> chosen(n);
  std::vector<Correspondence> sample(n);

  while (iterations < std::min(k, config.max_iterations)) {
    ++iterations;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t idx;
      do {
        idx = pick(rng);
      } while (std::find(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(i), idx) !=
               chosen.begin() + static_cast<std::ptrdiff_t>(i));
      chosen[i] = idx;
      sample[i] = sample_pool[idx];
    }

    Eigen::Matrix3d model;
    if (detail::dlt_solve_raw(sample, model) != detail::DltStatus::kOk) continue;

    const std::size_t support = detail::count_inliers(model, score_pool, config.epsilon);
    if (support <= best_support) continue;
    best_support = support;
    best_model = model;

    const std::size_t explained = same_pool ? support : detail::count_inliers(model, sample_pool, config.epsilon);
    if (explained > 0) {
      const double w_hat = std::min(1.0, static_cast<double>(explained) / static_cast<double>(sample_pool.size()));
      k = std::min(k, required_iterations(w_hat, n, config.p, config.max_iterations));
    }
  }

  if (best_support < 4) throw NoModelFound("no sampled model reached a support of 4");

  std::vector<std::size_t> inliers = detail::collect_inliers(best_model, score_pool, config.epsilon);
  Homography result_model(best_model);
  {
    std::vector<Correspondence> inlier_set;
    inlier_set.reserve(inliers.size());
    for (std::size_t i : inliers) inlier_set.push_back(score_pool[i]);
    Eigen::Matrix3d refit;
    if (detail::dlt_solve_raw(inlier_set, refit) == detail::DltStatus::kOk) {
      try {
        Homography refit_model(refit);
        auto refit_inliers = detail::collect_inliers(refit_model.matrix(), score_pool, config.epsilon);
        if (refit_inliers.size() >= inliers.size()) {
          result_model = refit_model;
          inliers = std::move(refit_inliers);
        }
      } catch (const SingularMatrix&) {
      }
    }
  }
  // Canonical scaling can move an error across the threshold by an ulp.
  inliers = detail::collect_inliers(result_model.matrix(), score_pool, config.epsilon);

  EstimationResult result;
  result.model = result_model;
  result.support = inliers.size();
  result.inlier_indices = std::move(inliers);
  result.iterations_run = iterations;
  result.k_final = k;
  result.elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// Overload where the sample pool is given as indices into the scoring pool.
inline EstimationResult ransac_homography(std::span<const Correspondence> score_pool,
                                          std::span<const std::size_t> sample_indices, double w_init,
                                          const RansacConfig& config) {
  std::vector<Correspondence> sample_pool;
  sample_pool.reserve(sample_indices.size());
  for (std::size_t i : sample_indices) {
    if (i >= score_pool.size()) throw InvalidArgument("sample index outside the scoring pool");
    sample_pool.push_back(score_pool[i]);
  }
  return ransac_homography(sample_pool, score_pool, w_init, config);
}

}  // namespace hsolo

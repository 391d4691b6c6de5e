#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"

namespace hsolo {

// Recipe for a synthetic two-view scene with a known homography. Both images
// share the same bounds.
struct SceneSpec {
  Homography truth;
  double width = 640.0;
  double height = 480.0;
  std::size_t n_total = 500;
  double inlier_rate = 0.1;
  double pixel_noise_sigma = 0.0;  // on inlier target positions, pixels
  double scale_noise_sigma = 0.0;  // log-normal, on the second feature's scale
  double angle_noise_sigma = 0.0;  // radians, on the second feature's angle
  std::uint64_t seed = 0;

  // Inlier sources come from this central fraction of image 1.
  double sampling_fraction = 0.8;
  // Base detector scale, log-uniform.
  double feature_scale_min = 1.0;
  double feature_scale_max = 8.0;
  // Scale ratio between the two ends of an outlier, log-uniform.
  double outlier_scale_min = 0.5;
  double outlier_scale_max = 2.0;

  void validate() const {
    if (!(inlier_rate > 0.0 && inlier_rate <= 1.0)) throw InvalidArgument("inlier_rate must lie in (0, 1]");
    if (n_total < 8) throw InvalidArgument("n_total must be at least 8");
    if (!(pixel_noise_sigma >= 0.0 && scale_noise_sigma >= 0.0 && angle_noise_sigma >= 0.0)) {
      throw InvalidArgument("noise sigmas must be non-negative");
    }
    if (!(width > 0.0 && height > 0.0)) throw InvalidArgument("image bounds must be positive");
    if (!(sampling_fraction > 0.0 && sampling_fraction <= 1.0)) throw InvalidArgument("sampling_fraction must lie in (0, 1]");
    if (!(feature_scale_min > 0.0 && feature_scale_max >= feature_scale_min)) throw InvalidArgument("bad feature scale range");
    if (!(outlier_scale_min > 0.0 && outlier_scale_max >= outlier_scale_min)) throw InvalidArgument("bad outlier scale range");
  }
};

struct Scene {
  std::vector<Correspondence> correspondences;
  std::vector<bool> inlier_mask;
};

// What an ideal affine-aware detector reports for the local map at a point.
struct LocalByproducts {
  double scale_ratio = 1.0;  // sqrt(|det J|), the geometric mean of J's singular values
  double angle_delta = 0.0;  // rotation angle of J's orthogonal polar factor
  bool orientation_preserving = true;
};

// Analytic 2x2 Jacobian of the projective map at p.
inline Eigen::Matrix2d projective_jacobian(const Homography& h, const Point2& p) {
  const Eigen::Matrix3d& m = h.matrix();
  const Point2 q = project(h, p);
  const double w = m(2, 0) * p.u + m(2, 1) * p.v + m(2, 2);
  Eigen::Matrix2d j;
  j << m(0, 0) - q.u * m(2, 0), m(0, 1) - q.u * m(2, 1),
       m(1, 0) - q.v * m(2, 0), m(1, 1) - q.v * m(2, 1);
  return j / w;
}

inline LocalByproducts jacobian_byproducts(const Homography& truth, const Point2& p) {
  const Eigen::Matrix2d j = projective_jacobian(truth, p);
  const double a = j(0, 0), b = j(0, 1), c = j(1, 0), d = j(1, 1);
  const double det = a * d - b * c;
  LocalByproducts out;
  out.scale_ratio = std::sqrt(std::abs(det));
  out.orientation_preserving = det > 0.0;
  // For a reflection the polar factor is R(phi) * diag(1, -1); report phi.
  out.angle_delta = out.orientation_preserving ? std::atan2(c - b, a + d) : std::atan2(c + b, a - d);
  return out;
}

// Mild projective map used by the CLI and the benchmarks for 640x480 images.
inline Homography default_truth() {
  return Homography::from_row_major({1.02, 0.12, -10.0, -0.09, 1.01, 25.0, 1.2e-4, -0.8e-4, 1.0});
}

/// Draws a scene: round(n_total * inlier_rate) inliers whose targets and
/// byproducts follow `truth` (plus the configured noise), the rest uniform
/// random outliers, in seeded random order.
inline Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> angle_dist(-std::numbers::pi, std::numbers::pi);

  auto log_uniform = [&](double lo, double hi) { return lo * std::exp(unit(rng) * std::log(hi / lo)); };

  const auto n_inliers = std::min<std::size_t>(
      spec.n_total, static_cast<std::size_t>(std::llround(static_cast<double>(spec.n_total) * spec.inlier_rate)));
  const double margin = 0.5 * (1.0 - spec.sampling_fraction);
  auto inside = [&](const Point2& q) { return q.u >= 0.0 && q.u < spec.width && q.v >= 0.0 && q.v < spec.height; };

  std::vector<Correspondence> items;
  std::vector<bool> mask;
  items.reserve(spec.n_total);
  mask.reserve(spec.n_total);

  const std::size_t max_attempts = 2 * n_inliers + 10;
  std::size_t attempts = 0;
  while (items.size() < n_inliers) {
    if (++attempts > max_attempts) {
      throw InfeasibleSpec("truth maps most of the sampling region outside image 2");
    }
    const Point2 src{spec.width * (margin + spec.sampling_fraction * unit(rng)),
                     spec.height * (margin + spec.sampling_fraction * unit(rng))};
    const double base_scale = log_uniform(spec.feature_scale_min, spec.feature_scale_max);
    const double base_angle = angle_dist(rng);
    const double nu = normal(rng), nv = normal(rng), ns = normal(rng), na = normal(rng);

    double x, y;
    if (!detail::project_raw(spec.truth.matrix(), src.u, src.v, x, y)) continue;
    if (!inside({x, y})) continue;
    const LocalByproducts local = jacobian_byproducts(spec.truth, src);

    const Point2 dst{x + spec.pixel_noise_sigma * nu, y + spec.pixel_noise_sigma * nv};
    const double scale_b = base_scale * local.scale_ratio * std::exp(spec.scale_noise_sigma * ns);
    const double angle_b = base_angle + local.angle_delta + spec.angle_noise_sigma * na;
    items.push_back({AffineFeature(src, base_scale, base_angle), AffineFeature(dst, scale_b, angle_b)});
    mask.push_back(true);
  }

  while (items.size() < spec.n_total) {
    const Point2 src{spec.width * unit(rng), spec.height * unit(rng)};
    const Point2 dst{spec.width * unit(rng), spec.height * unit(rng)};
    const double base_scale = log_uniform(spec.feature_scale_min, spec.feature_scale_max);
    const double ratio = log_uniform(spec.outlier_scale_min, spec.outlier_scale_max);
    const double angle_a = angle_dist(rng);
    const double angle_b = angle_dist(rng);
    items.push_back({AffineFeature(src, base_scale, angle_a), AffineFeature(dst, base_scale * ratio, angle_b)});
    mask.push_back(false);
  }

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Scene scene;
  scene.correspondences.reserve(items.size());
  scene.inlier_mask.reserve(items.size());
  for (std::size_t i : order) {
    scene.correspondences.push_back(items[i]);
    scene.inlier_mask.push_back(mask[i]);
  }
  return scene;
}

}  // namespace hsolo

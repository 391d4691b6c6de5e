#pragma once

// Levenberg-Marquardt refinement of a homography over its inliers. The eight
// free parameters are h1..h8 with h9 fixed to 1.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"
#include "hsolo/solvers.hpp"

namespace hsolo {

using HomographyParams = Eigen::Matrix<double, 8, 1>;

struct RefineResult {
  Homography model;
  double initial_cost = 0.0;  // sum of squared reprojection errors, pixels^2
  double final_cost = 0.0;
  int iterations = 0;
  bool degraded = false;  // normal matrix was singular; model is the input
};

struct RefineOptions {
  int max_iterations = 100;
  double min_relative_decrease = 1e-10;
  double min_step = 1e-12;
  double initial_damping = 1e-3;
};

inline Eigen::Matrix3d params_to_matrix(const HomographyParams& x) {
  Eigen::Matrix3d m;
  m << x(0), x(1), x(2), x(3), x(4), x(5), x(6), x(7), 1.0;
  return m;
}

// Residuals (projected - observed), two per correspondence. Returns false if
// any point projects to infinity.
inline bool reprojection_residuals(const HomographyParams& x, std::span<const Correspondence> cs, Eigen::VectorXd& r) {
  r.resize(static_cast<Eigen::Index>(2 * cs.size()));
  const Eigen::Matrix3d m = params_to_matrix(x);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    double px, py;
    if (!detail::project_raw(m, cs[i].a.point().u, cs[i].a.point().v, px, py)) return false;
    r(static_cast<Eigen::Index>(2 * i)) = px - cs[i].b.point().u;
    r(static_cast<Eigen::Index>(2 * i + 1)) = py - cs[i].b.point().v;
  }
  return true;
}

// Analytic Jacobian of reprojection_residuals with respect to h1..h8.
inline Eigen::MatrixXd reprojection_jacobian(const HomographyParams& x, std::span<const Correspondence> cs) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(2 * cs.size()), 8);
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const double u = cs[i].a.point().u, v = cs[i].a.point().v;
    const double w = x(6) * u + x(7) * v + 1.0;
    const double px = (x(0) * u + x(1) * v + x(2)) / w;
    const double py = (x(3) * u + x(4) * v + x(5)) / w;
    const auto rx = static_cast<Eigen::Index>(2 * i), ry = rx + 1;
    j(rx, 0) = u / w;
    j(rx, 1) = v / w;
    j(rx, 2) = 1.0 / w;
    j(rx, 6) = -px * u / w;
    j(rx, 7) = -px * v / w;
    j(ry, 3) = u / w;
    j(ry, 4) = v / w;
    j(ry, 5) = 1.0 / w;
    j(ry, 6) = -py * u / w;
    j(ry, 7) = -py * v / w;
  }
  return j;
}

inline double reprojection_cost(const Homography& h, std::span<const Correspondence> cs) {
  double cost = 0.0;
  for (const auto& c : cs) {
    const double e = reprojection_error_or_inf(h, c);
    cost += e * e;
  }
  return cost;
}

namespace detail {

inline Correspondence transform_points(const Correspondence& c, const Eigen::Matrix3d& t1, const Eigen::Matrix3d& t2) {
  const Point2 p = c.a.point(), q = c.b.point();
  return {AffineFeature({t1(0, 0) * p.u + t1(0, 2), t1(1, 1) * p.v + t1(1, 2)}, c.a.scale(), c.a.angle()),
          AffineFeature({t2(0, 0) * q.u + t2(0, 2), t2(1, 1) * q.v + t2(1, 2)}, c.b.scale(), c.b.angle())};
}

}  // namespace detail

/// Minimizes the sum of squared reprojection errors of `inliers` starting at
/// `h`. The optimization runs on Hartley-normalized coordinates, which only
/// rescales the cost. The returned cost never exceeds the initial cost; if
/// the normal matrix is singular the input is returned with `degraded` set.
inline RefineResult refine_model(const Homography& h, std::span<const Correspondence> inliers,
                                 const RefineOptions& options = {}) {
  if (inliers.size() < 4) throw InsufficientData("refinement needs at least 4 inliers");

  RefineResult result{h, reprojection_cost(h, inliers), 0.0, 0, false};
  result.final_cost = result.initial_cost;
  if (result.initial_cost == 0.0) return result;

  const std::size_t n = inliers.size();
  auto src = [&](std::size_t i) { return inliers[i].a.point(); };
  auto dst = [&](std::size_t i) { return inliers[i].b.point(); };
  const Eigen::Matrix3d t1 = detail::hartley_normalization(n, src);
  const Eigen::Matrix3d t2 = detail::hartley_normalization(n, dst);
  std::vector<Correspondence> normalized;
  normalized.reserve(n);
  for (const auto& c : inliers) normalized.push_back(detail::transform_points(c, t1, t2));

  Eigen::Matrix3d hn = t2 * h.matrix() * t1.inverse();
  if (!(std::abs(hn(2, 2)) > kSingularTolerance * hn.norm())) {
    result.degraded = true;
    return result;
  }
  hn /= hn(2, 2);
  HomographyParams x;
  x << hn(0, 0), hn(0, 1), hn(0, 2), hn(1, 0), hn(1, 1), hn(1, 2), hn(2, 0), hn(2, 1);

  Eigen::VectorXd r;
  if (!reprojection_residuals(x, normalized, r)) {
    result.degraded = true;
    return result;
  }
  double cost = r.squaredNorm();
  Eigen::MatrixXd j = reprojection_jacobian(x, normalized);

  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(j);
    const auto& sv = svd.singularValues();
    if (!(sv(7) > 1e-12 * sv(0))) {
      result.degraded = true;
      return result;
    }
  }

  double damping = options.initial_damping;
  for (int it = 0; it < options.max_iterations; ++it) {
    result.iterations = it + 1;
    const Eigen::Matrix<double, 8, 8> jtj = j.transpose() * j;
    const HomographyParams g = j.transpose() * r;

    Eigen::Matrix<double, 8, 8> a = jtj;
    a.diagonal() += damping * jtj.diagonal();
    Eigen::LDLT<Eigen::Matrix<double, 8, 8>> ldlt(a);
    if (ldlt.info() != Eigen::Success) {
      damping *= 10.0;
      continue;
    }
    const HomographyParams step = -ldlt.solve(g);
    const bool tiny_step = step.norm() < options.min_step * (1.0 + x.norm());

    const HomographyParams candidate = x + step;
    Eigen::VectorXd r_new;
    const bool ok = reprojection_residuals(candidate, normalized, r_new);
    const double cost_new = ok ? r_new.squaredNorm() : std::numeric_limits<double>::infinity();

    if (cost_new < cost) {
      const double relative = (cost - cost_new) / cost;
      x = candidate;
      r = std::move(r_new);
      cost = cost_new;
      j = reprojection_jacobian(x, normalized);
      damping = std::max(damping / 10.0, 1e-15);
      if (relative < options.min_relative_decrease || tiny_step || cost == 0.0) break;
    } else {
      damping *= 10.0;
      if (tiny_step || damping > 1e16) break;
    }
  }

  try {
    const Homography refined(t2.inverse() * params_to_matrix(x) * t1);
    const double final_cost = reprojection_cost(refined, inliers);
    if (final_cost < result.initial_cost) {
      result.model = refined;
      result.final_cost = final_cost;
    }
  } catch (const SingularMatrix&) {
  }
  return result;
}

}  // namespace hsolo

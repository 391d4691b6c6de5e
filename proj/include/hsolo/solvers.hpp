#pragma once

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "hsolo/errors.hpp"
#include "hsolo/geometry.hpp"

namespace hsolo {

// Scale, rotation and translation of a skew-free, isotropic affine map.
struct SimilarityParts {
  double scale = 1.0;
  double angle = 0.0;
  double tx = 0.0;
  double ty = 0.0;
};

// T(tx, ty) * R(angle) * S(scale): maps the canonical feature patch into the
// image, so the patch origin lands on (tx, ty).
inline Homography similarity_to_matrix(const SimilarityParts& parts) {
  if (!(parts.scale > 0.0) || !std::isfinite(parts.scale)) {
    throw InvalidArgument("similarity scale must be positive");
  }
  const double c = std::cos(parts.angle) * parts.scale;
  const double s = std::sin(parts.angle) * parts.scale;
  Eigen::Matrix3d m;
  m << c, -s, parts.tx,
       s, c, parts.ty,
       0.0, 0.0, 1.0;
  return Homography(m);
}

inline SimilarityParts feature_frame(const AffineFeature& f) {
  return {f.scale(), f.angle(), f.point().u, f.point().v};
}

// Exact inverse of the map built by similarity_to_matrix.
inline SimilarityParts inverse(const SimilarityParts& parts) {
  const double inv_scale = 1.0 / parts.scale;
  const double c = std::cos(parts.angle) * inv_scale;
  const double s = std::sin(parts.angle) * inv_scale;
  // R(-a) S(1/s) applied to -t.
  return {inv_scale, -parts.angle, -(c * parts.tx + s * parts.ty), -(-s * parts.tx + c * parts.ty)};
}

/// Affine homography from a single affine-aware correspondence.
///
/// Each feature defines a frame mapping its canonical patch into its image;
/// the result is frame(b) * frame(a)^-1, which takes image-1 coordinates to
/// image-2 coordinates. It maps a.point() onto b.point() and its linear part
/// is (s_b / s_a) * R(theta_b - theta_a).
inline Homography single_match_homography(const Correspondence& c) {
  if (!(c.a.scale() > 0.0) || !(c.b.scale() > 0.0)) {
    throw InvalidFeature("feature scales must be positive");
  }
  const Eigen::Matrix3d frame_b = similarity_to_matrix(feature_frame(c.b)).matrix();
  const Eigen::Matrix3d frame_a_inv = similarity_to_matrix(inverse(feature_frame(c.a))).matrix();
  return Homography(frame_b * frame_a_inv);
}

// Collinearity threshold: triangle area relative to the bounding-box area.
inline constexpr double kCollinearityTolerance = 1e-6;
// Largest accepted ratio between the extreme diagonal entries of the QR factor.
inline constexpr double kMaxConditionEstimate = 1e10;

namespace detail {

inline double triangle_area(const Point2& a, const Point2& b, const Point2& c) {
  return 0.5 * std::abs((b.u - a.u) * (c.v - a.v) - (c.u - a.u) * (b.v - a.v));
}

template <typename GetPoint>
bool points_degenerate(std::size_t n, GetPoint&& point) {
  double min_u = point(0).u, max_u = min_u, min_v = point(0).v, max_v = min_v;
  for (std::size_t i = 1; i < n; ++i) {
    const Point2 p = point(i);
    min_u = std::min(min_u, p.u);
    max_u = std::max(max_u, p.u);
    min_v = std::min(min_v, p.v);
    max_v = std::max(max_v, p.v);
  }
  const double box_area = (max_u - min_u) * (max_v - min_v);
  if (!(box_area > 0.0)) return true;

  if (n == 4) {
    // A minimal sample must have every triple in general position.
    for (std::size_t skip = 0; skip < 4; ++skip) {
      std::array<Point2, 3> t;
      for (std::size_t i = 0, j = 0; i < 4; ++i) {
        if (i != skip) t[j++] = point(i);
      }
      if (triangle_area(t[0], t[1], t[2]) <= kCollinearityTolerance * box_area) return true;
    }
    return false;
  }

  // Over-determined sets only need to span the plane.
  double cu = 0.0, cv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cu += point(i).u;
    cv += point(i).v;
  }
  cu /= static_cast<double>(n);
  cv /= static_cast<double>(n);
  double suu = 0.0, suv = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = point(i).u - cu, dv = point(i).v - cv;
    suu += du * du;
    suv += du * dv;
    svv += dv * dv;
  }
  const double trace = suu + svv;
  const double det = suu * svv - suv * suv;
  // Ratio of the covariance eigenvalues, small eigenvalue ~ det / trace.
  return !(det > kCollinearityTolerance * kCollinearityTolerance * trace * trace);
}

// Similarity that moves the centroid to the origin with RMS distance sqrt(2).
template <typename GetPoint>
Eigen::Matrix3d hartley_normalization(std::size_t n, GetPoint&& point) {
  double cu = 0.0, cv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cu += point(i).u;
    cv += point(i).v;
  }
  cu /= static_cast<double>(n);
  cv /= static_cast<double>(n);
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = point(i).u - cu, dv = point(i).v - cv;
    sq += du * du + dv * dv;
  }
  const double rms = std::sqrt(sq / static_cast<double>(n));
  const double s = rms > 0.0 ? std::numbers::sqrt2 / rms : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * cu,
       0.0, s, -s * cv,
       0.0, 0.0, 1.0;
  return t;
}

enum class DltStatus { kOk, kTooFewPoints, kDegenerate, kIllConditioned, kSingular };

// Non-throwing DLT used inside sampling loops.
inline DltStatus dlt_solve_raw(std::span<const Correspondence> cs, Eigen::Matrix3d& out) {
  const std::size_t n = cs.size();
  if (n < 4) return DltStatus::kTooFewPoints;
  auto src = [&](std::size_t i) { return cs[i].a.point(); };
  auto dst = [&](std::size_t i) { return cs[i].b.point(); };
  if (points_degenerate(n, src) || points_degenerate(n, dst)) return DltStatus::kDegenerate;

  const Eigen::Matrix3d t1 = hartley_normalization(n, src);
  const Eigen::Matrix3d t2 = hartley_normalization(n, dst);

  // Two rows per correspondence; h9 = 1 moved to the right-hand side.
  Eigen::MatrixXd a(2 * n, 8);
  Eigen::VectorXd b(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = src(i), q = dst(i);
    const double u1 = t1(0, 0) * p.u + t1(0, 2), v1 = t1(1, 1) * p.v + t1(1, 2);
    const double u2 = t2(0, 0) * q.u + t2(0, 2), v2 = t2(1, 1) * q.v + t2(1, 2);
    const Eigen::Index r = static_cast<Eigen::Index>(2 * i);
    a.row(r) << u1, v1, 1.0, 0.0, 0.0, 0.0, -u1 * u2, -v1 * u2;
    a.row(r + 1) << 0.0, 0.0, 0.0, u1, v1, 1.0, -u1 * v2, -v1 * v2;
    b(r) = u2;
    b(r + 1) = v2;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  const auto diag = qr.matrixQR().diagonal().cwiseAbs();
  const double largest = diag.maxCoeff();
  const double smallest = diag.head(8).minCoeff();
  if (!(smallest > 0.0) || largest / smallest > kMaxConditionEstimate) return DltStatus::kIllConditioned;
  const Eigen::VectorXd h = qr.solve(b);

  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  out = t2.inverse() * hn * t1;
  if (!out.allFinite()) return DltStatus::kIllConditioned;
  const double norm = out.norm();
  if (std::abs(out.determinant()) <= kSingularTolerance * norm * norm * norm) return DltStatus::kSingular;
  return DltStatus::kOk;
}

}  // namespace detail

/// Least-squares homography from four or more correspondences (normalized
/// DLT with h9 fixed to 1). Throws DegenerateConfiguration for collinear or
/// coincident points and IllConditioned when the linear system is close to
/// rank deficient.
inline Homography dlt_solve(std::span<const Correspondence> correspondences) {
  Eigen::Matrix3d m;
  switch (detail::dlt_solve_raw(correspondences, m)) {
    case detail::DltStatus::kOk:
      return Homography(m);
    case detail::DltStatus::kTooFewPoints:
      throw InsufficientData("dlt_solve needs at least 4 correspondences");
    case detail::DltStatus::kDegenerate:
      throw DegenerateConfiguration("collinear or coincident points");
    case detail::DltStatus::kIllConditioned:
      throw IllConditioned("DLT system is ill-conditioned");
    case detail::DltStatus::kSingular:
      throw SingularMatrix("DLT produced a singular homography");
  }
  throw Error("unreachable");
}

}  // namespace hsolo

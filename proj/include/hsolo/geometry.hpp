#pragma once

// Core projective types. Pixel convention: origin at the top-left corner,
// x to the right, y down. Every operation here is covariant under a change
// of that convention, so it only matters when interpreting image bounds.

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "hsolo/errors.hpp"

namespace hsolo {

// Determinant and homogeneous-w thresholds, relative to the Frobenius norm.
inline constexpr double kSingularTolerance = 1e-12;

struct Point2 {
  double u = 0.0;
  double v = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

inline bool is_finite(const Point2& p) { return std::isfinite(p.u) && std::isfinite(p.v); }

inline double distance(const Point2& a, const Point2& b) { return std::hypot(a.u - b.u, a.v - b.v); }

// Wraps an angle into [-pi, pi).
inline double normalize_angle(double theta) {
  double r = std::remainder(theta, 2.0 * std::numbers::pi);
  if (r >= std::numbers::pi) r -= 2.0 * std::numbers::pi;
  return r;
}

// Returns m rescaled to canonical form: h9 = 1 when h9 is non-zero,
// otherwise unit Frobenius norm with the first non-zero entry positive.
// Applying it to an already canonical matrix returns it bit-for-bit.
inline Eigen::Matrix3d canonicalize(const Eigen::Matrix3d& m) {
  const double norm = m.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw InvalidArgument("homography entries must be finite and not all zero");
  }
  const double h9 = m(2, 2);
  if (std::abs(h9) > kSingularTolerance * norm) {
    if (h9 == 1.0) return m;
    return m / h9;
  }
  Eigen::Matrix3d out = m;
  if (std::abs(norm - 1.0) > 4.0 * std::numeric_limits<double>::epsilon()) out /= norm;
  for (int i = 0; i < 9; ++i) {
    const double e = out(i / 3, i % 3);
    if (e != 0.0) {
      if (e < 0.0) out = -out;
      break;
    }
  }
  return out;
}

// A 3x3 invertible projective transform, always held in canonical form.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}

  explicit Homography(const Eigen::Matrix3d& m) : m_(canonicalize(m)) {
    const double norm = m_.norm();
    if (std::abs(m_.determinant()) <= kSingularTolerance * norm * norm * norm) {
      throw SingularMatrix("homography is singular");
    }
  }

  // Entries h1..h9 in row-major order.
  static Homography from_row_major(const std::array<double, 9>& h) {
    Eigen::Matrix3d m;
    m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
    return Homography(m);
  }

  static Homography identity() { return Homography(); }

  static Homography translation(double tx, double ty) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = tx;
    m(1, 2) = ty;
    return Homography(m);
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  std::array<double, 9> row_major() const {
    return {m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2), m_(2, 0), m_(2, 1), m_(2, 2)};
  }

  friend bool operator==(const Homography& a, const Homography& b) { return a.m_ == b.m_; }

 private:
  Eigen::Matrix3d m_;
};

// Feature location plus the detector's scale and orientation.
class AffineFeature {
 public:
  AffineFeature() = default;

  AffineFeature(Point2 p, double scale, double angle) : p_(p), scale_(scale) {
    if (!is_finite(p)) throw InvalidFeature("feature location must be finite");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidFeature("feature scale must be positive and finite");
    if (!std::isfinite(angle)) throw InvalidFeature("feature angle must be finite");
    angle_ = normalize_angle(angle);
  }

  const Point2& point() const { return p_; }
  double scale() const { return scale_; }
  double angle() const { return angle_; }

  friend bool operator==(const AffineFeature&, const AffineFeature&) = default;

 private:
  Point2 p_{};
  double scale_ = 1.0;
  double angle_ = 0.0;
};

struct Correspondence {
  AffineFeature a;  // first image
  AffineFeature b;  // second image

  friend bool operator==(const Correspondence&, const Correspondence&) = default;
};

inline Correspondence reversed(const Correspondence& c) { return {c.b, c.a}; }

// Point-only correspondence with neutral byproducts.
inline Correspondence make_correspondence(Point2 p1, Point2 p2) { return {AffineFeature(p1, 1.0, 0.0), AffineFeature(p2, 1.0, 0.0)}; }

namespace detail {

// Projects (u, v) through m. Returns false when w is below tolerance.
inline bool project_raw(const Eigen::Matrix3d& m, double u, double v, double& x, double& y) {
  const double w = m(2, 0) * u + m(2, 1) * v + m(2, 2);
  const double scale = m.norm() * (1.0 + std::abs(u) + std::abs(v));
  if (!(std::abs(w) > kSingularTolerance * scale)) return false;
  x = (m(0, 0) * u + m(0, 1) * v + m(0, 2)) / w;
  y = (m(1, 0) * u + m(1, 1) * v + m(1, 2)) / w;
  return true;
}

}  // namespace detail

inline Point2 project(const Homography& h, const Point2& p) {
  Point2 out;
  if (!detail::project_raw(h.matrix(), p.u, p.v, out.u, out.v)) {
    throw DegenerateProjection("point maps to the line at infinity");
  }
  return out;
}

inline double reprojection_error(const Homography& h, const Correspondence& c) {
  return distance(project(h, c.a.point()), c.b.point());
}

// Same as reprojection_error but maps a degenerate projection to +inf,
// which is what scoring loops want.
inline double reprojection_error_or_inf(const Eigen::Matrix3d& m, const Correspondence& c) {
  double x, y;
  if (!detail::project_raw(m, c.a.point().u, c.a.point().v, x, y)) {
    return std::numeric_limits<double>::infinity();
  }
  return std::hypot(x - c.b.point().u, y - c.b.point().v);
}

inline double reprojection_error_or_inf(const Homography& h, const Correspondence& c) {
  return reprojection_error_or_inf(h.matrix(), c);
}

// compose(a, b) applies b first, then a.
inline Homography compose(const Homography& a, const Homography& b) { return Homography(a.matrix() * b.matrix()); }

inline Homography invert(const Homography& h) {
  const Eigen::Matrix3d& m = h.matrix();
  const double norm = m.norm();
  if (std::abs(m.determinant()) <= kSingularTolerance * norm * norm * norm) {
    throw SingularMatrix("cannot invert a singular homography");
  }
  return Homography(m.inverse());
}

}  // namespace hsolo

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "hsolo/solvers.hpp"
#include "hsolo/synthetic.hpp"
#include "test_support.hpp"

namespace hsolo {
namespace {

using testing::angle_distance;

SceneSpec spec_for(const Homography& truth, double w, std::uint64_t seed) {
  SceneSpec spec;
  spec.truth = truth;
  spec.inlier_rate = w;
  spec.seed = seed;
  return spec;
}

Eigen::Matrix2d finite_difference_jacobian(const Homography& h, const Point2& p) {
  const double step = 1e-4;
  Eigen::Matrix2d j;
  const Point2 up = project(h, {p.u + step, p.v}), um = project(h, {p.u - step, p.v});
  const Point2 vp = project(h, {p.u, p.v + step}), vm = project(h, {p.u, p.v - step});
  j << (up.u - um.u) / (2 * step), (vp.u - vm.u) / (2 * step),
       (up.v - um.v) / (2 * step), (vp.v - vm.v) / (2 * step);
  return j;
}

TEST(GenerateScene, IdentityTruthGivesIdenticalPairs) {
  SceneSpec spec = spec_for(Homography::identity(), 1.0, 1);
  spec.n_total = 100;
  const Scene scene = generate_scene(spec);
  ASSERT_EQ(scene.correspondences.size(), 100u);
  for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
    const Correspondence& c = scene.correspondences[i];
    EXPECT_TRUE(scene.inlier_mask[i]);
    EXPECT_EQ(c.a.point().u, c.b.point().u);
    EXPECT_EQ(c.a.point().v, c.b.point().v);
    EXPECT_NEAR(c.b.scale() / c.a.scale(), 1.0, 1e-15);
    EXPECT_LE(angle_distance(c.b.angle(), c.a.angle()), 1e-15);
  }
}

TEST(GenerateScene, RotationTruthGivesConstantByproducts) {
  const double theta = 0.3;
  const Homography rot = compose(Homography::translation(320, 240),
                                 compose(similarity_to_matrix({1.0, theta, 0.0, 0.0}), Homography::translation(-320, -240)));
  SceneSpec spec = spec_for(rot, 0.5, 2);
  spec.n_total = 200;
  const Scene scene = generate_scene(spec);
  for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
    if (!scene.inlier_mask[i]) continue;
    const Correspondence& c = scene.correspondences[i];
    EXPECT_NEAR(c.b.scale() / c.a.scale(), 1.0, 1e-12);
    EXPECT_LE(angle_distance(c.b.angle() - c.a.angle(), theta), 1e-12);
  }
}

TEST(GenerateScene, GenericTruthInliersAreExactAndLocallyAccurate) {
  const Homography truth = default_truth();
  const Scene scene = generate_scene(spec_for(truth, 0.3, 3));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> radius(0.0, 10.0), angle(-std::numbers::pi, std::numbers::pi);
  for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
    if (!scene.inlier_mask[i]) continue;
    const Correspondence& c = scene.correspondences[i];
    EXPECT_EQ(reprojection_error(truth, c), 0.0);
    const Homography local = single_match_homography(c);
    for (int k = 0; k < 20; ++k) {
      const double r = radius(rng), t = angle(rng);
      const Point2 p{c.a.point().u + r * std::cos(t), c.a.point().v + r * std::sin(t)};
      EXPECT_LT(distance(project(local, p), project(truth, p)), 2.0);
    }
  }
}

TEST(JacobianByproducts, IdentityAndSimilarity) {
  const LocalByproducts id = jacobian_byproducts(Homography::identity(), {17.0, 3.0});
  EXPECT_EQ(id.scale_ratio, 1.0);
  EXPECT_EQ(id.angle_delta, 0.0);
  EXPECT_TRUE(id.orientation_preserving);

  const Homography sim = similarity_to_matrix({2.0, std::numbers::pi / 6, 40.0, -3.0});
  for (const Point2 p : {Point2{0, 0}, Point2{100, 50}, Point2{600, 470}}) {
    const LocalByproducts b = jacobian_byproducts(sim, p);
    EXPECT_NEAR(b.scale_ratio, 2.0, 1e-12);
    EXPECT_NEAR(b.angle_delta, std::numbers::pi / 6, 1e-12);
  }
}

TEST(JacobianByproducts, ReflectionFlagged) {
  const auto mirror = Homography::from_row_major({-1, 0, 640, 0, 1, 0, 0, 0, 1});
  const LocalByproducts b = jacobian_byproducts(mirror, {10, 10});
  EXPECT_FALSE(b.orientation_preserving);
  EXPECT_NEAR(b.scale_ratio, 1.0, 1e-15);
}

TEST(ProjectiveJacobian, MatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const Homography h = testing::random_homography(rng);
    const Point2 p = testing::random_point(rng);
    EXPECT_LE((projective_jacobian(h, p) - finite_difference_jacobian(h, p)).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(GenerateScene, RealizedInlierCountIsRounded) {
  for (double w : {0.03, 0.05, 0.1, 0.123, 0.5, 1.0}) {
    SceneSpec spec = spec_for(default_truth(), w, 5);
    spec.n_total = 333;
    const Scene scene = generate_scene(spec);
    const auto inliers = std::count(scene.inlier_mask.begin(), scene.inlier_mask.end(), true);
    EXPECT_EQ(inliers, std::llround(333 * w)) << "w=" << w;
    EXPECT_EQ(scene.correspondences.size(), 333u);
  }
}

TEST(GenerateScene, Deterministic) {
  SceneSpec spec = spec_for(default_truth(), 0.2, 6);
  spec.pixel_noise_sigma = 1.0;
  spec.scale_noise_sigma = 0.1;
  spec.angle_noise_sigma = 0.05;
  const Scene a = generate_scene(spec), b = generate_scene(spec);
  ASSERT_EQ(a.correspondences.size(), b.correspondences.size());
  EXPECT_EQ(a.inlier_mask, b.inlier_mask);
  for (std::size_t i = 0; i < a.correspondences.size(); ++i) {
    EXPECT_EQ(a.correspondences[i].b.point().u, b.correspondences[i].b.point().u);
    EXPECT_EQ(a.correspondences[i].b.scale(), b.correspondences[i].b.scale());
    EXPECT_EQ(a.correspondences[i].b.angle(), b.correspondences[i].b.angle());
  }
  spec.seed = 7;
  const Scene c = generate_scene(spec);
  EXPECT_NE(a.correspondences[0].a.point().u, c.correspondences[0].a.point().u);
}

TEST(GenerateScene, ByproductsMatchTruthToFirstOrder) {
  const Homography truth = default_truth();
  const Scene scene = generate_scene(spec_for(truth, 0.5, 8));
  for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
    if (!scene.inlier_mask[i]) continue;
    const Correspondence& c = scene.correspondences[i];
    // The affine estimate is a similarity; compare its linear part against the
    // similarity the byproducts describe.
    const Eigen::Matrix2d linear = single_match_homography(c).matrix().topLeftCorner<2, 2>();
    const LocalByproducts local = jacobian_byproducts(truth, c.a.point());
    Eigen::Matrix2d expected;
    expected << std::cos(local.angle_delta), -std::sin(local.angle_delta), std::sin(local.angle_delta),
        std::cos(local.angle_delta);
    expected *= local.scale_ratio;
    EXPECT_LE((linear - expected).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(GenerateScene, NoisyByproductsStillValid) {
  SceneSpec spec = spec_for(default_truth(), 0.1, 9);
  spec.pixel_noise_sigma = 1.0;
  spec.scale_noise_sigma = 0.1;
  spec.angle_noise_sigma = 0.05;
  const Scene scene = generate_scene(spec);
  for (std::size_t i = 0; i < scene.correspondences.size(); ++i) {
    const Correspondence& c = scene.correspondences[i];
    EXPECT_GT(c.b.scale(), 0.0);
    EXPECT_GE(c.b.angle(), -std::numbers::pi);
    EXPECT_LT(c.b.angle(), std::numbers::pi);
    if (!scene.inlier_mask[i]) {
      const double ratio = c.b.scale() / c.a.scale();
      EXPECT_GE(ratio, 0.5 - 1e-12);
      EXPECT_LE(ratio, 2.0 + 1e-12);
    }
  }
}

TEST(GenerateScene, InfeasibleTruthThrows) {
  const Homography away = Homography::translation(5000.0, 0.0);
  EXPECT_THROW(generate_scene(spec_for(away, 0.5, 10)), InfeasibleSpec);
}

TEST(GenerateScene, ValidatesSpec) {
  SceneSpec spec = spec_for(default_truth(), 0.0, 11);
  EXPECT_THROW(generate_scene(spec), InvalidArgument);
  spec.inlier_rate = 0.5;
  spec.n_total = 7;
  EXPECT_THROW(generate_scene(spec), InvalidArgument);
  spec.n_total = 100;
  spec.pixel_noise_sigma = -1.0;
  EXPECT_THROW(generate_scene(spec), InvalidArgument);
}

}  // namespace
}  // namespace hsolo

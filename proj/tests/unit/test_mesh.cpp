#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "vilab/mesh.hpp"

using namespace vilab;

namespace {
const double kDiskArea = std::numbers::pi * 1.5 * 1.5;
}

TEST(ElementMap, LinearScalingJacobian) {
  const double h = 0.3;
  const auto m = ElementMap::linear({0, 0}, {h, 0}, {0, h});
  for (const Point2 xh : {Point2{0, 0}, Point2{0.7, -0.2}, Point2{-1, 1}}) {
    const Mat2 j = m.jacobian(xh);
    EXPECT_NEAR(j.m[0][0], h / 2, 1e-15);
    EXPECT_NEAR(j.m[1][1], h / 2, 1e-15);
    EXPECT_NEAR(j.m[0][1], 0.0, 1e-15);
    EXPECT_NEAR(j.m[1][0], 0.0, 1e-15);
  }
}

TEST(ElementMap, BilinearCentroid) {
  const auto m = ElementMap::bilinear({Point2{0, 0}, Point2{1, 0}, Point2{1, 1}, Point2{0, 1}});
  const Point2 c = m.eval({0, 0});
  EXPECT_NEAR(c.x, 0.5, 1e-15);
  EXPECT_NEAR(c.y, 0.5, 1e-15);
}

TEST(ElementMap, CurvedOuterEdgeOnCircle) {
  const double r = 1.5, r1 = 1.2;
  const double a0 = 0.1, a1 = 0.1 + std::numbers::pi / 4;
  auto pol = [](double rad, double t) { return Point2{rad * std::cos(t), rad * std::sin(t)}; };
  const auto m = ElementMap::curved({pol(r1, a1), pol(r1, a0), pol(r, a0), pol(r, a1)}, r);
  for (int k = 0; k <= 20; ++k) {
    const double s = -1.0 + k / 10.0;
    EXPECT_NEAR(m.eval({s, 1.0}).norm(), r, 1e-12 * r);
  }
}

TEST(InitialMesh, Structure) {
  const Mesh m = build_initial_disk_mesh(1.5);
  EXPECT_EQ(m.num_elements(), 20u);
  int counts[3] = {0, 0, 0};
  for (const auto& e : m.elements()) counts[static_cast<int>(e.map.kind())]++;
  EXPECT_EQ(counts[static_cast<int>(MapKind::Linear)], 4);
  EXPECT_EQ(counts[static_cast<int>(MapKind::Bilinear)], 8);
  EXPECT_EQ(counts[static_cast<int>(MapKind::Curved6)], 8);
  EXPECT_NEAR(m.area(13), kDiskArea, 1e-10 * kDiskArea);
  EXPECT_LE(m.boundary_deviation(13), 1e-12 * 1.5);
  EXPECT_GT(m.min_jacobian(13), 0.0);
  EXPECT_TRUE(m.is_one_irregular());
}

TEST(InitialMesh, FreeBoundaryInsideBilinearElements) {
  // Every element that the unit circle crosses is bilinear.
  const Mesh m = build_initial_disk_mesh(1.5);
  for (const auto& e : m.elements()) {
    double rmin = 1e9, rmax = 0.0;
    for (int i = 0; i <= 20; ++i)
      for (int j = 0; j <= 20; ++j) {
        const double r = e.map.eval({-1.0 + i / 10.0, -1.0 + j / 10.0}).norm();
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
      }
    if (rmin < 1.0 && rmax > 1.0) {
      EXPECT_EQ(e.map.kind(), MapKind::Bilinear);
    }
  }
}

TEST(Refinement, UniformCountsAreaAndBoundary) {
  Mesh m = build_initial_disk_mesh(1.5);
  std::size_t n = m.num_elements();
  for (int l = 1; l <= 5; ++l) {
    const double h_old = m.max_diameter();
    m = refine_uniform(m);
    EXPECT_EQ(m.num_elements(), 4 * n);
    n = m.num_elements();
    EXPECT_NEAR(m.area(13), kDiskArea, 1e-10 * kDiskArea) << "level " << l;
    EXPECT_LE(m.boundary_deviation(13), 1e-12 * 1.5);
    EXPECT_GT(m.min_jacobian(13), 0.0);
    EXPECT_NEAR(m.max_diameter() / h_old, 0.5, 0.1);
  }
  EXPECT_EQ(uniform_disk_mesh(1.5, 1).num_elements(), 80u);
}

TEST(Refinement, ShapeRegularityBounded) {
  Mesh m = build_initial_disk_mesh(1.5);
  double prev_gamma = 0.0, prev_step = 1e9;
  for (int l = 0; l <= 5; ++l) {
    double g = 0.0;
    for (std::size_t i = 0; i < m.num_elements(); ++i) g = std::max(g, m.shape_metric(i));
    EXPECT_LT(g, 20.0);
    if (l >= 3) {
      // Converges: increments shrink geometrically.
      const double step = std::abs(g - prev_gamma);
      EXPECT_LE(step, prev_step);
      prev_step = step;
    }
    prev_gamma = g;
    m = refine_uniform(m);
  }
}

TEST(Refinement, ChildClassification) {
  const Mesh m0 = build_initial_disk_mesh(1.5);
  const Mesh m1 = refine_uniform(m0);
  for (const auto& c : m1.elements()) {
    const MapKind pk = m0.elements()[c.parent].map.kind();
    if (pk == MapKind::Linear) {
      EXPECT_EQ(c.map.kind(), MapKind::Linear);
    }
    if (pk == MapKind::Bilinear) {
      EXPECT_EQ(c.map.kind(), MapKind::Bilinear);
    }
    if (pk == MapKind::Curved6) {
      EXPECT_NE(c.map.kind(), MapKind::Linear);
    }
    EXPECT_DOUBLE_EQ(c.sub_scale, 0.5);
  }
}

TEST(Refinement, AdaptiveAllMarkedEqualsUniform) {
  const Mesh m = uniform_disk_mesh(1.5, 1);
  std::vector<int> all(m.num_elements());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  const Mesh a = refine_adaptive(m, all);
  const Mesh u = refine_uniform(m);
  ASSERT_EQ(a.num_elements(), u.num_elements());
  ASSERT_EQ(a.vertices().size(), u.vertices().size());
  for (std::size_t i = 0; i < a.num_elements(); ++i)
    for (int k = 0; k < 4; ++k) {
      EXPECT_EQ(a.elements()[i].v[k], u.elements()[i].v[k]);
    }
}

TEST(Refinement, AdaptiveNoneMarkedUnchanged) {
  const Mesh m = uniform_disk_mesh(1.5, 1);
  const Mesh a = refine_adaptive(m, {});
  ASSERT_EQ(a.num_elements(), m.num_elements());
  ASSERT_EQ(a.vertices().size(), m.vertices().size());
  for (std::size_t i = 0; i < m.num_elements(); ++i)
    for (int k = 0; k < 4; ++k) EXPECT_EQ(a.elements()[i].v[k], m.elements()[i].v[k]);
}

TEST(Refinement, SingleInteriorElementStaysLocal) {
  const Mesh m = uniform_disk_mesh(1.5, 1);
  const Mesh a = refine_adaptive(m, {0});
  EXPECT_EQ(a.num_elements(), m.num_elements() + 3);
  EXPECT_TRUE(a.is_one_irregular());
  EXPECT_NEAR(a.area(13), kDiskArea, 1e-10 * kDiskArea);
}

TEST(Refinement, RepeatedLocalRefinementKeepsOneIrregular) {
  Mesh m = uniform_disk_mesh(1.5, 1);
  for (int step = 0; step < 6; ++step) {
    // Refine the element containing a fixed point on the free boundary.
    int target = -1;
    for (std::size_t i = 0; i < m.num_elements() && target < 0; ++i) {
      const Point2 c = m.elements()[i].map.eval({-0.999, -0.999});
      if (std::abs(c.norm() - 1.0) < m.element_diameter(i)) target = static_cast<int>(i);
    }
    ASSERT_GE(target, 0);
    m = refine_adaptive(m, {target});
    EXPECT_TRUE(m.is_one_irregular());
    EXPECT_NEAR(m.area(13), kDiskArea, 1e-10 * kDiskArea);
    EXPECT_GT(m.min_jacobian(13), 0.0);
  }
}

TEST(SquareMesh, SingleAffineElement) {
  const Mesh m = square_mesh({0, 0}, 1.0);
  EXPECT_EQ(m.num_elements(), 1u);
  EXPECT_NEAR(m.area(4), 1.0, 1e-15);
  EXPECT_EQ(m.elements()[0].map.kind(), MapKind::Linear);
}

TEST(ArcNodes, SymmetricAndOrdered) {
  const auto t = arc_node_parameters(std::numbers::pi / 8);
  EXPECT_DOUBLE_EQ(t[0], -1.0);
  EXPECT_DOUBLE_EQ(t[6], 1.0);
  for (int k = 0; k < 6; ++k) EXPECT_LT(t[k], t[k + 1]);
  for (int k = 0; k < 7; ++k) EXPECT_NEAR(t[k], -t[6 - k], 1e-14);
}

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "tilesense/catalog.hpp"
#include "tilesense/geometry.hpp"
#include "tilesense/rng.hpp"

namespace tilesense {
namespace {

// Fraction of uniform samples in the bounding box that land inside `p`.
double mc_area(const Polygon& p, Rng& rng, int n) {
  const AxisBox b = bounding_box(p);
  int inside = 0;
  for (int i = 0; i < n; ++i) inside += contains(p, {rng.uniform(b.x0, b.x1), rng.uniform(b.y0, b.y1)});
  return b.area() * inside / n;
}

double mc_iou(const Polygon& a, const Polygon& b, Rng& rng, int n) {
  AxisBox u = bounding_box(a);
  const AxisBox v = bounding_box(b);
  u = {std::min(u.x0, v.x0), std::min(u.y0, v.y0), std::max(u.x1, v.x1), std::max(u.y1, v.y1)};
  int both = 0, either = 0;
  for (int i = 0; i < n; ++i) {
    const Point2 p{rng.uniform(u.x0, u.x1), rng.uniform(u.y0, u.y1)};
    const bool ia = contains(a, p), ib = contains(b, p);
    both += ia && ib;
    either += ia || ib;
  }
  return either ? double(both) / either : 0.0;
}

TEST(Geometry, ModelAreasAgreeWithSampling) {
  Rng rng(1);
  for (const TileSpec& s : default_catalog().specs()) {
    const Polygon p = model_polygon(s.shape, s.w, s.h);
    EXPECT_NEAR(polygon_area(p), mc_area(p, rng, 400000), 0.01 * polygon_area(p)) << s.id;
  }
}

TEST(Geometry, CurvedAreasApproachTheCircle) {
  const double semi = polygon_area(model_polygon(ShapeClass::semicircle, 100, 50, 256));
  EXPECT_NEAR(semi, std::numbers::pi * 50 * 50 / 2, 0.1);
  const double quarter = polygon_area(model_polygon(ShapeClass::quarter_circle, 70, 70, 256));
  EXPECT_NEAR(quarter, std::numbers::pi * 70 * 70 / 4, 0.1);
}

TEST(Geometry, PoseCenterIsTheAreaCentroid) {
  for (const TileSpec& s : default_catalog().specs()) {
    const Polygon p = polygon_of(s.shape, make_oriented_box(100, 200, s.w, s.h, 33));
    const Point2 c = centroid(p);
    EXPECT_NEAR(c.x, 100, 1e-9) << s.id;
    EXPECT_NEAR(c.y, 200, 1e-9) << s.id;
    EXPECT_TRUE(is_convex(p));
  }
}

TEST(Geometry, RotatedIouMatchesSampling) {
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    const auto& specs = default_catalog().specs();
    const TileSpec& sa = specs[rng.below(specs.size())];
    const TileSpec& sb = specs[rng.below(specs.size())];
    const Polygon a = polygon_of(sa.shape, make_oriented_box(0, 0, sa.w, sa.h, rng.uniform(0, 360)));
    const Polygon b = polygon_of(sb.shape, make_oriented_box(rng.uniform(-40, 40), rng.uniform(-40, 40), sb.w, sb.h,
                                                             rng.uniform(0, 360)));
    EXPECT_NEAR(rotated_iou(a, b), mc_iou(a, b, rng, 200000), 0.01);
  }
}

TEST(Geometry, IouEdgeCases) {
  const Polygon a = polygon_of(ShapeClass::square, make_oriented_box(0, 0, 10, 10, 0));
  EXPECT_NEAR(rotated_iou(a, a), 1.0, 1e-12);
  const Polygon far = polygon_of(ShapeClass::square, make_oriented_box(100, 0, 10, 10, 45));
  EXPECT_EQ(rotated_iou(a, far), 0.0);
  // Edge-touching squares share no area.
  const Polygon touching = polygon_of(ShapeClass::square, make_oriented_box(10, 0, 10, 10, 0));
  EXPECT_NEAR(rotated_iou(a, touching), 0.0, 1e-12);
  const Polygon half = polygon_of(ShapeClass::square, make_oriented_box(5, 0, 10, 10, 0));
  EXPECT_NEAR(rotated_iou(a, half), 1.0 / 3.0, 1e-12);
}

TEST(Geometry, AxisIou) {
  EXPECT_NEAR(axis_iou({0, 0, 10, 10}, {5, 0, 15, 10}), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(axis_iou({0, 0, 1, 1}, {2, 2, 3, 3}), 0.0);
}

TEST(Geometry, SymmetryCanonicalization) {
  EXPECT_EQ(symmetry_of(ShapeClass::square).k, 4);
  EXPECT_EQ(symmetry_of(ShapeClass::rectangle).k, 2);
  EXPECT_EQ(symmetry_of(ShapeClass::equilateral_triangle).k, 3);
  EXPECT_EQ(symmetry_of(ShapeClass::right_triangle).k, 1);
  EXPECT_NEAR(canonical_theta(95, symmetry_of(ShapeClass::square)), 5, 1e-12);
  EXPECT_NEAR(canonical_theta(250, symmetry_of(ShapeClass::equilateral_triangle)), 10, 1e-12);
  EXPECT_NEAR(angular_error(1, 359, symmetry_of(ShapeClass::semicircle)), 2, 1e-12);
  EXPECT_NEAR(angular_error(2, 88, symmetry_of(ShapeClass::square)), 4, 1e-12);
}

TEST(Geometry, SymmetricRotationsGiveTheSamePolygon) {
  const Polygon a = polygon_of(ShapeClass::square, make_oriented_box(0, 0, 70, 70, 10));
  const Polygon b = polygon_of(ShapeClass::square, make_oriented_box(0, 0, 70, 70, 100));
  EXPECT_NEAR(rotated_iou(a, b), 1.0, 1e-9);
}

TEST(Geometry, OrientationBins) {
  const OrientationBins bins;
  EXPECT_EQ(bins.count(), 48);
  EXPECT_DOUBLE_EQ(bins.gap_deg(), 7.5);
  EXPECT_EQ(bin_of(0, bins), 0);
  EXPECT_EQ(bin_of(3.75, bins), 0);  // ties go to the lower bin
  EXPECT_EQ(bin_of(3.76, bins), 1);
  EXPECT_EQ(bin_of(358, bins), 0);
  EXPECT_DOUBLE_EQ(theta_of(2, bins), 15.0);
  for (int b = 0; b < 48; ++b) EXPECT_EQ(bin_of(theta_of(b, bins), bins), b);
  EXPECT_THROW(OrientationBins(0), std::invalid_argument);
}

TEST(Geometry, ClipAndInset) {
  const Polygon sq = polygon_of(ShapeClass::square, make_oriented_box(0, 0, 10, 10, 0));
  EXPECT_NEAR(polygon_area(inset_convex(sq, 1)), 64, 1e-9);
  const Polygon halfplane = clip_halfplane(sq, {0, -10}, {0, 10});
  EXPECT_NEAR(polygon_area(halfplane), 50, 1e-9);
  EXPECT_NEAR(intersection_area(sq, sq), 100, 1e-9);
}

TEST(Geometry, ValidationRejectsBadInput) {
  EXPECT_THROW(make_oriented_box(0, 0, -1, 1, 0), std::invalid_argument);
  EXPECT_THROW(make_oriented_box(0, 0, 1, 1, std::nan("")), std::invalid_argument);
  EXPECT_THROW(validate_polygon(Polygon{{{0, 0}, {1, 0}}}), std::invalid_argument);
  EXPECT_EQ(shape_from_string(to_string(ShapeClass::quarter_circle)), ShapeClass::quarter_circle);
  EXPECT_THROW(shape_from_string("hexagon"), std::invalid_argument);
}

TEST(Geometry, SimilarityComposesRotationAndTranslation) {
  Similarity s;
  s.rotation_deg = 90;
  s.tx = 5;
  const Point2 p = s.apply(Point2{1, 0});
  EXPECT_NEAR(p.x, 5, 1e-12);
  EXPECT_NEAR(p.y, 1, 1e-12);
}

}  // namespace
}  // namespace tilesense

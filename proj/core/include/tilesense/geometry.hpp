#pragma once

// 2D primitives for tile poses: polygons, oriented boxes, convex clipping,
// rotated IoU, symmetry-aware orientation handling and orientation bins.
//
// Coordinates are BEV pixels. Angles are degrees, positive from +x toward +y,
// with 0 along +x. Polygons have positive shoelace area in (x, y); with the
// image convention (y down) that reads clockwise on screen.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tilesense {

/// Absolute tolerance, in pixels, used by geometric predicates.
inline constexpr double kGeomEps = 1e-9;

/// Chords used to discretize curved tile edges, for both ground truth and
/// predictions.
inline constexpr int kArcSegments = 16;

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(Point2 a, double s) { return {a.x * s, a.y * s}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
double distance(Point2 a, Point2 b);

/// Rotates `p` about the origin.
Point2 rotate(Point2 p, double theta_deg);

/// Ordered vertex list with positive signed area.
struct Polygon {
  std::vector<Point2> vertices;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  const Point2& operator[](std::size_t i) const { return vertices[i]; }
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// Axis-aligned box, [x0, x1] x [y0, y1].
struct AxisBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  Point2 center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  static AxisBox from_center(double cx, double cy, double w, double h) {
    return {cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0};
  }
};

double axis_iou(const AxisBox& a, const AxisBox& b);

/// Tile pose: center is the area centroid of the tile polygon.
struct OrientedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 1.0;
  double h = 1.0;
  double theta = 0.0;  ///< degrees in [0, 360)

  Point2 center() const { return {cx, cy}; }
};

/// Builds a validated box: w, h > 0, finite values, theta wrapped into [0, 360).
OrientedBox make_oriented_box(double cx, double cy, double w, double h, double theta);

enum class ShapeClass {
  square,
  rectangle,
  right_triangle,
  equilateral_triangle,
  semicircle,
  quarter_circle,
};

inline constexpr ShapeClass kAllShapes[] = {
    ShapeClass::square,     ShapeClass::rectangle,      ShapeClass::right_triangle,
    ShapeClass::equilateral_triangle, ShapeClass::semicircle, ShapeClass::quarter_circle,
};

std::string_view to_string(ShapeClass shape);
/// Throws std::invalid_argument for an unknown name.
ShapeClass shape_from_string(std::string_view name);
bool is_curved(ShapeClass shape);

/// Rotational symmetry order; orientation is meaningful modulo 360/k.
struct SymmetryOrder {
  int k = 1;
  double period() const { return 360.0 / k; }
};

SymmetryOrder symmetry_of(ShapeClass shape);

class OrientationBins {
 public:
  OrientationBins() : OrientationBins(48) {}
  explicit OrientationBins(int n_bins);

  int count() const { return n_bins_; }
  double gap_deg() const { return gap_deg_; }

 private:
  int n_bins_;
  double gap_deg_;
};

/// Wraps into [0, 360).
double normalize_deg(double theta);

/// theta mod (360 / k), in [0, 360 / k).
double canonical_theta(double theta, SymmetryOrder sym);

/// Smallest rotation taking `a` onto `b` modulo the symmetry period, in
/// [0, period / 2].
double angular_error(double a, double b, SymmetryOrder sym);

/// Nearest bin center i * G; exact midpoints go to the lower index.
int bin_of(double theta, const OrientationBins& bins);
double theta_of(int bin, const OrientationBins& bins);

/// Shoelace signed area (positive for the orientation used here).
double signed_area(std::span<const Point2> pts);

/// Area of a valid polygon. Throws std::invalid_argument when the input has
/// fewer than three vertices or zero area (collinear input).
double polygon_area(const Polygon& p);

Point2 centroid(const Polygon& p);
AxisBox bounding_box(const Polygon& p);

bool is_convex(const Polygon& p);

/// Throws std::invalid_argument unless `p` has >= 3 finite vertices and
/// positive area.
void validate_polygon(const Polygon& p);

/// Tile model at theta = 0 scaled to (w, h), centroid at the origin.
///
/// Vertex order and start per shape:
///   square, rectangle      corner (-w/2, -h/2) first, then (+w/2, -h/2), ...
///   right_triangle         right-angle corner, then the end of the w leg,
///                          then the end of the h leg
///   equilateral_triangle   left base corner, right base corner, apex
///   semicircle             arc from (+w/2, 0) through (0, +h) to (-w/2, 0)
///                          relative to the diameter midpoint
///   quarter_circle         corner, then the arc from the +x radius to the
///                          +y radius
Polygon model_polygon(ShapeClass shape, double w, double h, int arc_segments = kArcSegments);

/// Model polygon rotated by pose.theta about its centroid and moved to
/// (cx, cy). Throws std::invalid_argument if a curved shape gets fewer than
/// four arc segments.
Polygon polygon_of(ShapeClass shape, const OrientedBox& pose, int arc_segments = kArcSegments);

/// Sutherland-Hodgman clip of `subject` against convex `clip`. May return an
/// empty or degenerate polygon.
Polygon clip_convex(const Polygon& subject, const Polygon& clip);

/// Keeps the part of `p` at least `offset` to the left of the directed line a->b.
Polygon clip_halfplane(const Polygon& p, Point2 a, Point2 b, double offset = 0.0);

/// Convex polygon shrunk by `d` pixels along every edge normal. Empty when the
/// polygon vanishes.
Polygon inset_convex(const Polygon& p, double d);

double intersection_area(const Polygon& a, const Polygon& b);

/// area(a ∩ b) / area(a ∪ b) for convex inputs. Throws std::invalid_argument
/// for non-convex or invalid polygons.
double rotated_iou(const Polygon& a, const Polygon& b);

/// Point-in-convex-polygon test with kGeomEps slack on the boundary.
bool contains(const Polygon& convex, Point2 p);

/// p' = origin + scale * R(rotation) * (p - origin) + (tx, ty)
struct Similarity {
  double scale = 1.0;
  double rotation_deg = 0.0;
  double tx = 0.0;
  double ty = 0.0;
  Point2 origin{};

  Point2 apply(Point2 p) const;
  Polygon apply(const Polygon& p) const;
  bool is_identity() const {
    return scale == 1.0 && rotation_deg == 0.0 && tx == 0.0 && ty == 0.0;
  }
};

}  // namespace tilesense

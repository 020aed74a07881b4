#include "tilesense/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tilesense {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool all_finite(const Polygon& p) {
  return std::all_of(p.vertices.begin(), p.vertices.end(),
                     [](Point2 v) { return std::isfinite(v.x) && std::isfinite(v.y); });
}

void append_arc(std::vector<Point2>& out, double rx, double ry, double from_deg, double to_deg,
                int segments) {
  for (int i = 0; i <= segments; ++i) {
    const double phi = (from_deg + (to_deg - from_deg) * i / segments) * kDegToRad;
    out.push_back({rx * std::cos(phi), ry * std::sin(phi)});
  }
}

}  // namespace

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

Point2 rotate(Point2 p, double theta_deg) {
  const double t = theta_deg * kDegToRad;
  const double c = std::cos(t);
  const double s = std::sin(t);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

double axis_iou(const AxisBox& a, const AxisBox& b) {
  const double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

OrientedBox make_oriented_box(double cx, double cy, double w, double h, double theta) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h) ||
      !std::isfinite(theta)) {
    throw std::invalid_argument("oriented box: non-finite value");
  }
  if (w <= 0.0 || h <= 0.0) throw std::invalid_argument("oriented box: w and h must be > 0");
  return {cx, cy, w, h, normalize_deg(theta)};
}

std::string_view to_string(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::square: return "square";
    case ShapeClass::rectangle: return "rectangle";
    case ShapeClass::right_triangle: return "right_triangle";
    case ShapeClass::equilateral_triangle: return "equilateral_triangle";
    case ShapeClass::semicircle: return "semicircle";
    case ShapeClass::quarter_circle: return "quarter_circle";
  }
  return "unknown";
}

ShapeClass shape_from_string(std::string_view name) {
  for (ShapeClass s : kAllShapes) {
    if (to_string(s) == name) return s;
  }
  throw std::invalid_argument("unknown shape class: " + std::string(name));
}

bool is_curved(ShapeClass shape) {
  return shape == ShapeClass::semicircle || shape == ShapeClass::quarter_circle;
}

SymmetryOrder symmetry_of(ShapeClass shape) {
  switch (shape) {
    case ShapeClass::square: return {4};
    case ShapeClass::rectangle: return {2};
    case ShapeClass::equilateral_triangle: return {3};
    default: return {1};
  }
}

OrientationBins::OrientationBins(int n_bins) : n_bins_(n_bins), gap_deg_(0.0) {
  if (n_bins <= 0) throw std::invalid_argument("orientation bins: n_bins must be positive");
  gap_deg_ = 360.0 / n_bins;
}

double normalize_deg(double theta) {
  double t = std::fmod(theta, 360.0);
  if (t < 0.0) t += 360.0;
  // fmod of a tiny negative value can round up to exactly 360
  if (t >= 360.0) t -= 360.0;
  return t;
}

double canonical_theta(double theta, SymmetryOrder sym) {
  const double period = sym.period();
  double t = std::fmod(theta, period);
  if (t < 0.0) t += period;
  if (t >= period) t -= period;
  return t;
}

double angular_error(double a, double b, SymmetryOrder sym) {
  const double d = canonical_theta(a - b, sym);
  return std::min(d, sym.period() - d);
}

int bin_of(double theta, const OrientationBins& bins) {
  const double t = normalize_deg(theta);
  const int idx = static_cast<int>(std::ceil(t / bins.gap_deg() - 0.5));
  return ((idx % bins.count()) + bins.count()) % bins.count();
}

double theta_of(int bin, const OrientationBins& bins) { return bin * bins.gap_deg(); }

double signed_area(std::span<const Point2> pts) {
  const std::size_t n = pts.size();
  if (n < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += cross(pts[i], pts[(i + 1) % n]);
  }
  return acc / 2.0;
}

double polygon_area(const Polygon& p) {
  if (p.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  const double a = signed_area(p.vertices);
  if (std::abs(a) <= kGeomEps) throw std::invalid_argument("degenerate polygon (zero area)");
  return std::abs(a);
}

Point2 centroid(const Polygon& p) {
  const std::size_t n = p.size();
  double a2 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 u = p[i];
    const Point2 v = p[(i + 1) % n];
    const double c = cross(u, v);
    a2 += c;
    cx += (u.x + v.x) * c;
    cy += (u.y + v.y) * c;
  }
  if (std::abs(a2) <= kGeomEps) {
    // degenerate: fall back to the vertex mean
    Point2 m{};
    for (Point2 v : p.vertices) m = m + v;
    return n ? m * (1.0 / static_cast<double>(n)) : m;
  }
  return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

AxisBox bounding_box(const Polygon& p) {
  if (p.empty()) return {};
  AxisBox b{p[0].x, p[0].y, p[0].x, p[0].y};
  for (Point2 v : p.vertices) {
    b.x0 = std::min(b.x0, v.x);
    b.y0 = std::min(b.y0, v.y);
    b.x1 = std::max(b.x1, v.x);
    b.y1 = std::max(b.y1, v.y);
  }
  return b;
}

bool is_convex(const Polygon& p) {
  const std::size_t n = p.size();
  if (n < 3) return false;
  if (signed_area(p.vertices) <= kGeomEps) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = p[i];
    const Point2 b = p[(i + 1) % n];
    const Point2 c = p[(i + 2) % n];
    const Point2 e1 = b - a;
    const Point2 e2 = c - b;
    const double scale = std::max(1.0, std::hypot(e1.x, e1.y) * std::hypot(e2.x, e2.y));
    if (cross(e1, e2) < -kGeomEps * scale) return false;
  }
  return true;
}

void validate_polygon(const Polygon& p) {
  if (p.size() < 3) throw std::invalid_argument("polygon needs at least 3 vertices");
  if (!all_finite(p)) throw std::invalid_argument("polygon has non-finite vertices");
  if (signed_area(p.vertices) <= kGeomEps) {
    throw std::invalid_argument("polygon must have positive signed area");
  }
}

Polygon model_polygon(ShapeClass shape, double w, double h, int arc_segments) {
  if (w <= 0.0 || h <= 0.0) throw std::invalid_argument("model polygon: w and h must be > 0");
  if (is_curved(shape) && arc_segments < 4) {
    throw std::invalid_argument("curved shapes need at least 4 arc segments");
  }
  std::vector<Point2> v;
  switch (shape) {
    case ShapeClass::square:
    case ShapeClass::rectangle:
      v = {{-w / 2, -h / 2}, {w / 2, -h / 2}, {w / 2, h / 2}, {-w / 2, h / 2}};
      break;
    case ShapeClass::right_triangle:
      v = {{0, 0}, {w, 0}, {0, h}};
      break;
    case ShapeClass::equilateral_triangle:
      v = {{0, 0}, {w, 0}, {w / 2, h}};
      break;
    case ShapeClass::semicircle:
      append_arc(v, w / 2, h, 0.0, 180.0, arc_segments);
      break;
    case ShapeClass::quarter_circle:
      v.push_back({0, 0});
      append_arc(v, w, h, 0.0, 90.0, arc_segments);
      break;
  }
  Polygon poly{std::move(v)};
  const Point2 c = centroid(poly);
  for (Point2& p : poly.vertices) p = p - c;
  return poly;
}

Polygon polygon_of(ShapeClass shape, const OrientedBox& pose, int arc_segments) {
  Polygon poly = model_polygon(shape, pose.w, pose.h, arc_segments);
  const Point2 c = pose.center();
  for (Point2& p : poly.vertices) p = c + rotate(p, pose.theta);
  return poly;
}

Polygon clip_halfplane(const Polygon& p, Point2 a, Point2 b, double offset) {
  const Point2 dir = b - a;
  const double len = std::hypot(dir.x, dir.y);
  if (len <= 0.0 || p.empty()) return p;
  auto side = [&](Point2 q) { return cross(dir, q - a) / len - offset; };

  Polygon out;
  out.vertices.reserve(p.size() + 2);
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 cur = p[i];
    const Point2 nxt = p[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    const bool cur_in = sc >= -kGeomEps;
    const bool nxt_in = sn >= -kGeomEps;
    if (cur_in) out.vertices.push_back(cur);
    if (cur_in != nxt_in) {
      const double t = sc / (sc - sn);
      out.vertices.push_back(cur + (nxt - cur) * t);
    }
  }
  return out;
}

Polygon clip_convex(const Polygon& subject, const Polygon& clip) {
  Polygon out = subject;
  const std::size_t n = clip.size();
  for (std::size_t i = 0; i < n && !out.empty(); ++i) {
    out = clip_halfplane(out, clip[i], clip[(i + 1) % n]);
  }
  return out;
}

Polygon inset_convex(const Polygon& p, double d) {
  Polygon out = p;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n && !out.empty(); ++i) {
    out = clip_halfplane(out, p[i], p[(i + 1) % n], d);
  }
  if (out.size() < 3 || signed_area(out.vertices) <= kGeomEps) return {};
  return out;
}

double intersection_area(const Polygon& a, const Polygon& b) {
  const AxisBox ba = bounding_box(a);
  const AxisBox bb = bounding_box(b);
  if (ba.x1 < bb.x0 || bb.x1 < ba.x0 || ba.y1 < bb.y0 || bb.y1 < ba.y0) return 0.0;
  const Polygon inter = clip_convex(a, b);
  return std::max(0.0, signed_area(inter.vertices));
}

double rotated_iou(const Polygon& a, const Polygon& b) {
  if (!is_convex(a) || !is_convex(b)) {
    throw std::invalid_argument("rotated_iou requires convex polygons");
  }
  const double inter = intersection_area(a, b);
  const double uni = signed_area(a.vertices) + signed_area(b.vertices) - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const Polygon& convex, Point2 q) {
  const std::size_t n = convex.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (cross(convex[(i + 1) % n] - convex[i], q - convex[i]) < -kGeomEps) return false;
  }
  return n >= 3;
}

Point2 Similarity::apply(Point2 p) const {
  const Point2 r = rotate(p - origin, rotation_deg) * scale;
  return {origin.x + r.x + tx, origin.y + r.y + ty};
}

Polygon Similarity::apply(const Polygon& p) const {
  Polygon out;
  out.vertices.reserve(p.size());
  for (Point2 v : p.vertices) out.vertices.push_back(apply(v));
  return out;
}

}  // namespace tilesense

#include "tilesense/refdetect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace tilesense {

namespace {

constexpr std::uint8_t kUnknown = 0xFF;

std::array<double, 3> to3(const Rgb& c) { return {double(c[0]), double(c[1]), double(c[2])}; }

Rgb shade(const Rgb& c, double f) {
  return {static_cast<std::uint8_t>(std::lround(c[0] * f)), static_cast<std::uint8_t>(std::lround(c[1] * f)),
          static_cast<std::uint8_t>(std::lround(c[2] * f))};
}

double forward(double c, double gain, double gamma) {
  const double v = std::min(255.0, gain * c);
  return gamma == 1.0 ? v : 255.0 * std::pow(v / 255.0, gamma);
}

int saturation(const std::uint8_t* p) {
  return std::max({p[0], p[1], p[2]}) - std::min({p[0], p[1], p[2]});
}

// Fill and border colors of every spec, in prototype order (fill 2i, border 2i+1).
std::vector<Rgb> tile_colors(const Catalog& catalog) {
  std::vector<Rgb> out;
  for (const TileSpec& s : catalog.specs()) {
    out.push_back(s.color);
    out.push_back(shade(s.color, kBorderShade));
  }
  return out;
}

Image box_blur(const Image& in, int r) {
  const int W = in.width;
  const int H = in.height;
  std::vector<int> tmp(static_cast<std::size_t>(W) * H * 3);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int k = 0; k < 3; ++k) {
        int s = 0;
        int n = 0;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= W) continue;
          s += in.px(xx, y)[k];
          ++n;
        }
        tmp[(static_cast<std::size_t>(y) * W + x) * 3 + k] = (s * 16) / n;
      }
    }
  }
  Image out(W, H);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int k = 0; k < 3; ++k) {
        int s = 0;
        int n = 0;
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= H) continue;
          s += tmp[(static_cast<std::size_t>(yy) * W + x) * 3 + k];
          ++n;
        }
        out.px(x, y)[k] = static_cast<std::uint8_t>(std::clamp((s + 8 * n) / (16 * n), 0, 255));
      }
    }
  }
  return out;
}

// x-extent of a convex polygon along the horizontal line at y.
bool convex_span(const std::vector<Point2>& p, double y, double& xl, double& xr) {
  xl = std::numeric_limits<double>::infinity();
  xr = -std::numeric_limits<double>::infinity();
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = p[i];
    const Point2 b = p[(i + 1) % n];
    if ((a.y <= y && y < b.y) || (b.y <= y && y < a.y)) {
      const double x = a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y);
      xl = std::min(xl, x);
      xr = std::max(xr, x);
    }
  }
  return xl <= xr;
}

// Soft overlap between a region mask and a convex polygon: each pixel row is
// cut by the polygon span at the row center, partial pixels counted by length.
class MaskOverlap {
 public:
  explicit MaskOverlap(const Region& r) : region_(r), stride_(static_cast<std::size_t>(r.width()) + 1) {
    prefix_.assign(stride_ * static_cast<std::size_t>(r.height()), 0);
    for (int y = 0; y < r.height(); ++y) {
      std::uint32_t acc = 0;
      for (int x = 0; x < r.width(); ++x) {
        acc += r.mask[static_cast<std::size_t>(y) * r.width() + x];
        prefix_[static_cast<std::size_t>(y) * stride_ + x + 1] = acc;
      }
    }
  }

  double intersection(const std::vector<Point2>& poly) const {
    double ymin = poly[0].y;
    double ymax = poly[0].y;
    for (const Point2& p : poly) {
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
    const int r0 = std::max(region_.y0, static_cast<int>(std::floor(ymin)));
    const int r1 = std::min(region_.y1 - 1, static_cast<int>(std::ceil(ymax)));
    double total = 0.0;
    for (int r = r0; r <= r1; ++r) {
      double xl = 0.0;
      double xr = 0.0;
      if (!convex_span(poly, r + 0.5, xl, xr)) continue;
      xl = std::max(xl - region_.x0, 0.0);
      xr = std::min(xr - region_.x0, static_cast<double>(region_.width()));
      if (xr <= xl) continue;
      total += row_sum(r - region_.y0, xl, xr);
    }
    return total;
  }

 private:
  double cell(int row, int c) const {
    return region_.mask[static_cast<std::size_t>(row) * region_.width() + c] ? 1.0 : 0.0;
  }

  double row_sum(int row, double xl, double xr) const {
    const std::uint32_t* pre = prefix_.data() + static_cast<std::size_t>(row) * stride_;
    const int cl = static_cast<int>(std::floor(xl));
    const int cr = static_cast<int>(std::floor(xr));
    if (cl == cr) return cell(row, std::min(cl, region_.width() - 1)) * (xr - xl);
    double s = cell(row, cl) * (cl + 1 - xl);
    s += static_cast<double>(pre[cr] - pre[cl + 1]);
    if (cr < region_.width()) s += cell(row, cr) * (xr - cr);
    return s;
  }

  const Region& region_;
  std::size_t stride_;
  std::vector<std::uint32_t> prefix_;
};

}  // namespace

std::array<double, 3> ColorModel::apply(const Rgb& c) const {
  return {forward(c[0], gain, gamma), forward(c[1], gain, gamma), forward(c[2], gain, gamma)};
}

ColorModel estimate_color_model(const Image& image, const Catalog& catalog) {
  ColorModel model;
  const std::array<double, 3> playmat = to3(kPlaymatColor);

  std::array<std::array<std::uint32_t, 256>, 3> hist{};
  std::size_t n_bg = 0;
  std::vector<const std::uint8_t*> colored;
  for (int y = 0; y < image.height; y += 2) {
    for (int x = 0; x < image.width; x += 2) {
      const std::uint8_t* p = image.px(x, y);
      if (saturation(p) <= 30 && p[0] + p[1] + p[2] > 180) {
        for (int k = 0; k < 3; ++k) ++hist[k][p[k]];
        ++n_bg;
      } else if ((x % 4 == 0) && (y % 4 == 0)) {
        colored.push_back(p);
      }
    }
  }
  if (n_bg == 0) return model;
  for (int k = 0; k < 3; ++k) {
    std::size_t acc = 0;
    int v = 0;
    while (v < 255 && (acc += hist[k][v]) * 2 < n_bg) ++v;
    model.background[k] = v;
  }

  const std::vector<Rgb> colors = tile_colors(catalog);
  auto gain_for = [&](double gamma) {
    double g = 0.0;
    for (int k = 0; k < 3; ++k) g += 255.0 * std::pow(std::max(model.background[k], 1.0) / 255.0, 1.0 / gamma) / playmat[k];
    return g / 3.0;
  };
  constexpr double cap = 40.0 * 40.0;
  auto cost = [&](double gamma) {
    const double gain = gain_for(gamma);
    std::vector<std::array<double, 3>> protos;
    for (const Rgb& c : colors) protos.push_back({forward(c[0], gain, gamma), forward(c[1], gain, gamma), forward(c[2], gain, gamma)});
    double total = 0.0;
    for (const std::uint8_t* p : colored) {
      double best = cap;
      for (const auto& q : protos) {
        const double d0 = p[0] - q[0];
        const double d1 = p[1] - q[1];
        const double d2 = p[2] - q[2];
        best = std::min(best, d0 * d0 + d1 * d1 + d2 * d2);
      }
      total += best;
    }
    return total;
  };

  double best_gamma = 1.0;
  if (!colored.empty()) {
    double best_cost = std::numeric_limits<double>::infinity();
    for (double g = 0.7; g <= 1.35 + 1e-9; g += 0.025) {
      const double c = cost(g);
      if (c < best_cost) {
        best_cost = c;
        best_gamma = g;
      }
    }
    double lo = best_gamma - 0.025;
    double hi = best_gamma + 0.025;
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = hi - phi * (hi - lo);
    double b = lo + phi * (hi - lo);
    double fa = cost(a);
    double fb = cost(b);
    for (int i = 0; i < 12; ++i) {
      if (fa <= fb) {
        hi = b;
        b = a;
        fb = fa;
        a = hi - phi * (hi - lo);
        fa = cost(a);
      } else {
        lo = a;
        a = b;
        fa = fb;
        b = lo + phi * (hi - lo);
        fb = cost(b);
      }
    }
    const double refined = (lo + hi) / 2.0;
    if (cost(refined) <= best_cost) best_gamma = refined;
  }
  model.gamma = best_gamma;
  model.gain = gain_for(best_gamma);
  return model;
}

void SegmentParams::validate(const Catalog& catalog) const {
  if (!(color_tolerance > 0.0)) throw std::invalid_argument("segment.color_tolerance must be > 0");
  if (catalog.size() > 1 && !(color_tolerance < catalog.min_color_distance() / 2.0)) {
    throw std::invalid_argument("segment.color_tolerance must be below half the minimum catalog color distance");
  }
  if (min_region_area < 1) throw std::invalid_argument("segment.min_region_area must be >= 1");
  if (erosion_radius < 0 || erosion_radius > 3) throw std::invalid_argument("segment.erosion_radius must be in [0, 3]");
  if (smoothing_radius < 0 || smoothing_radius > 3) throw std::invalid_argument("segment.smoothing_radius must be in [0, 3]");
}

std::vector<Region> segment(const Image& input, const Catalog& catalog, const SegmentParams& params) {
  const Image smoothed = params.smoothing_radius > 0 ? box_blur(input, params.smoothing_radius) : Image{};
  const Image& image = params.smoothing_radius > 0 ? smoothed : input;
  const int W = image.width;
  const int H = image.height;

  const ColorModel model = params.normalize_photometrics ? estimate_color_model(image, catalog) : ColorModel{};
  // Prototype 0 is the background; 1 + 2i and 2 + 2i are fill and border of spec i.
  std::vector<std::array<double, 3>> protos{model.background};
  for (const Rgb& c : tile_colors(catalog)) protos.push_back(model.apply(c));
  const double tol2 = params.color_tolerance * params.color_tolerance;

  // Per-pixel fill label: spec index, or kUnknown.
  std::vector<std::uint8_t> label(static_cast<std::size_t>(W) * H, kUnknown);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const std::uint8_t* p = image.px(x, y);
      double best = tol2;
      std::size_t arg = 0;
      bool found = false;
      for (std::size_t i = 0; i < protos.size(); ++i) {
        const double d0 = p[0] - protos[i][0];
        const double d1 = p[1] - protos[i][1];
        const double d2 = p[2] - protos[i][2];
        const double d = d0 * d0 + d1 * d1 + d2 * d2;
        if (d <= best) {
          best = d;
          arg = i;
          found = true;
        }
      }
      if (found && arg % 2 == 1) label[static_cast<std::size_t>(y) * W + x] = static_cast<std::uint8_t>((arg - 1) / 2);
    }
  }

  if (params.erosion_radius > 0) {
    const int r = params.erosion_radius;
    std::vector<std::uint8_t> eroded(label.size(), kUnknown);
    for (int y = r; y < H - r; ++y) {
      for (int x = r; x < W - r; ++x) {
        const std::uint8_t l = label[static_cast<std::size_t>(y) * W + x];
        if (l == kUnknown) continue;
        bool keep = true;
        for (int dy = -r; dy <= r && keep; ++dy) {
          for (int dx = -r; dx <= r && keep; ++dx) keep = label[static_cast<std::size_t>(y + dy) * W + x + dx] == l;
        }
        if (keep) eroded[static_cast<std::size_t>(y) * W + x] = l;
      }
    }
    label.swap(eroded);
  }

  std::vector<std::int32_t> comp(label.size(), -1);
  std::vector<Region> regions;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < label.size(); ++start) {
    if (label[start] == kUnknown || comp[start] >= 0) continue;
    const std::uint8_t l = label[start];
    const auto id = static_cast<std::int32_t>(regions.size());
    Region r;
    r.spec_index = l;
    r.x0 = W;
    r.y0 = H;
    double sx = 0.0;
    double sy = 0.0;
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % W);
      const int y = static_cast<int>(i / W);
      ++r.pixel_count;
      sx += x + 0.5;
      sy += y + 0.5;
      r.x0 = std::min(r.x0, x);
      r.y0 = std::min(r.y0, y);
      r.x1 = std::max(r.x1, x + 1);
      r.y1 = std::max(r.y1, y + 1);
      for (int dy = -1; dy <= 1; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= H) continue;
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= W) continue;
          const std::size_t j = static_cast<std::size_t>(yy) * W + xx;
          if (label[j] == l && comp[j] < 0) {
            comp[j] = id;
            stack.push_back(j);
          }
        }
      }
    }
    r.centroid = {sx / static_cast<double>(r.pixel_count), sy / static_cast<double>(r.pixel_count)};
    regions.push_back(std::move(r));
  }

  std::vector<Region> kept;
  std::vector<std::int32_t> remap(regions.size(), -1);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (regions[i].pixel_count < static_cast<std::size_t>(params.min_region_area)) continue;
    remap[i] = static_cast<std::int32_t>(kept.size());
    Region& r = regions[i];
    r.spec_id = catalog[r.spec_index].id;
    r.mask.assign(static_cast<std::size_t>(r.width()) * r.height(), 0);
    kept.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    Region& r = kept[i];
    for (int y = r.y0; y < r.y1; ++y) {
      for (int x = r.x0; x < r.x1; ++x) {
        const std::int32_t c = comp[static_cast<std::size_t>(y) * W + x];
        if (c >= 0 && remap[static_cast<std::size_t>(c)] == static_cast<std::int32_t>(i)) {
          r.mask[static_cast<std::size_t>(y - r.y0) * r.width() + (x - r.x0)] = 1;
        }
      }
    }
  }
  return kept;
}

std::optional<Detection> fit_pose(const Region& region, const Catalog& catalog, const FitParams& params) {
  if (region.pixel_count == 0 || region.mask.empty()) return std::nullopt;
  const TileSpec& spec = catalog[region.spec_index];
  const double inset = kBorderWidthPx + params.erosion_radius;
  const double mask_area = static_cast<double>(region.pixel_count);

  auto fill_model = [&](double s) { return inset_convex(model_polygon(spec.shape, s * spec.w, s * spec.h), inset); };
  auto fill_area = [&](double s) {
    const Polygon p = fill_model(s);
    return p.size() >= 3 ? std::abs(signed_area(p.vertices)) : 0.0;
  };

  double scale = 1.0;
  if (params.estimate_scale) {
    double lo = 0.7;
    double hi = 1.4;
    if (fill_area(lo) >= mask_area) {
      scale = lo;
    } else if (fill_area(hi) <= mask_area) {
      scale = hi;
    } else {
      for (int i = 0; i < 40; ++i) {
        const double mid = (lo + hi) / 2.0;
        (fill_area(mid) < mask_area ? lo : hi) = mid;
      }
      scale = (lo + hi) / 2.0;
    }
  }

  const Polygon fill = fill_model(scale);
  if (fill.size() < 3) return std::nullopt;
  const double fill_a = std::abs(signed_area(fill.vertices));
  const Point2 d = centroid(fill);
  std::vector<Point2> local;
  for (const Point2& v : fill.vertices) local.push_back(v - d);

  const MaskOverlap overlap(region);
  std::vector<Point2> placed(local.size());
  auto score = [&](double theta) {
    const double rad = theta * std::numbers::pi / 180.0;
    const double c = std::cos(rad);
    const double s = std::sin(rad);
    for (std::size_t i = 0; i < local.size(); ++i) {
      placed[i] = {region.centroid.x + c * local[i].x - s * local[i].y,
                   region.centroid.y + s * local[i].x + c * local[i].y};
    }
    const double inter = overlap.intersection(placed);
    return inter / (mask_area + fill_a - inter);
  };

  const double G = params.bins.gap_deg();
  const SymmetryOrder sym = spec.symmetry();
  const int coarse = std::max(1, static_cast<int>(std::lround(sym.period() / G)));
  double best_theta = 0.0;
  double best = -1.0;
  for (int i = 0; i < coarse; ++i) {
    const double th = i * G;
    const double v = score(th);
    if (v > best) {
      best = v;
      best_theta = th;
    }
  }

  double lo = best_theta - G / 2.0;
  double hi = best_theta + G / 2.0;
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = hi - phi * (hi - lo);
  double b = lo + phi * (hi - lo);
  double fa = score(a);
  double fb = score(b);
  for (int i = 0; i < params.refine_iterations; ++i) {
    if (fa >= fb) {
      hi = b;
      b = a;
      fb = fa;
      a = hi - phi * (hi - lo);
      fa = score(a);
    } else {
      lo = a;
      a = b;
      fa = fb;
      b = lo + phi * (hi - lo);
      fb = score(b);
    }
  }
  const double mid = (lo + hi) / 2.0;
  const double fm = score(mid);
  if (fm >= best) {
    best = fm;
    best_theta = mid;
  }
  if (best < params.min_overlap) return std::nullopt;

  const Point2 center = region.centroid - rotate(d, best_theta);
  Detection det;
  det.shape = spec.shape;
  det.spec_id = spec.id;
  det.score = std::clamp(best, std::numeric_limits<double>::min(), 1.0);
  det.pose = {center.x, center.y, scale * spec.w, scale * spec.h, canonical_theta(best_theta, sym)};
  det.orientation_bin = bin_of(det.pose.theta, params.bins);
  det.vertices = polygon_of(spec.shape, det.pose);
  det.box = bounding_box(det.vertices);
  return det;
}

std::vector<Detection> detect(const Image& image, const Catalog& catalog, const DetectParams& params) {
  std::vector<Detection> candidates;
  const std::vector<Region> regions = segment(image, catalog, params.segment);
  FitParams fit = params.fit;
  fit.erosion_radius = params.segment.erosion_radius;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    if (auto det = fit_pose(regions[i], catalog, fit)) {
      det->source = i;
      candidates.push_back(std::move(*det));
    }
  }
  return nms(std::move(candidates), params.nms_iou, params.rotated_nms, params.max_out);
}

}  // namespace tilesense

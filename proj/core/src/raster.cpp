#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "tilesense/rng.hpp"
#include "tilesense/scenegen.hpp"

namespace tilesense::scenegen {

namespace {

constexpr int kSuper = 4;

// x-extent of a convex polygon along the horizontal line at y.
bool convex_span(const Polygon& p, double y, double& xl, double& xr) {
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

void paint(std::vector<std::uint16_t>& labels, int sw, int sh, const Polygon& poly, std::uint16_t label) {
  if (poly.size() < 3) return;
  const AxisBox bb = bounding_box(poly);
  const int r0 = std::max(0, static_cast<int>(std::floor(bb.y0 * kSuper)));
  const int r1 = std::min(sh - 1, static_cast<int>(std::ceil(bb.y1 * kSuper)));
  for (int r = r0; r <= r1; ++r) {
    const double y = (r + 0.5) / kSuper;
    double xl = 0.0;
    double xr = 0.0;
    if (!convex_span(poly, y, xl, xr)) continue;
    const int c0 = std::max(0, static_cast<int>(std::ceil(xl * kSuper - 0.5)));
    const int c1 = std::min(sw - 1, static_cast<int>(std::floor(xr * kSuper - 0.5)));
    if (c1 < c0) continue;
    std::fill(labels.begin() + static_cast<std::ptrdiff_t>(r) * sw + c0,
              labels.begin() + static_cast<std::ptrdiff_t>(r) * sw + c1 + 1, label);
  }
}

double shadow_factor(const Shadow& s, double x, double y) {
  const Point2 u = rotate({x - s.cx, y - s.cy}, -s.angle_deg);
  const double rho = std::hypot(u.x / s.rx, u.y / s.ry);
  double f = 0.0;
  if (rho <= 0.6) {
    f = 1.0;
  } else if (rho < 1.0) {
    f = (1.0 - rho) / 0.4;
  }
  return 1.0 - s.strength * f;
}

}  // namespace

Image rasterize(const SceneSpec& scene, const Catalog& catalog) {
  const int W = scene.width;
  const int H = scene.height;
  const int sw = W * kSuper;
  const int sh = H * kSuper;

  // label 0 = playmat, 2i+1 = fill of tile i, 2i+2 = border of tile i
  std::vector<std::uint16_t> labels(static_cast<std::size_t>(sw) * sh, 0);
  std::vector<std::array<double, 3>> palette{{double(kPlaymatColor[0]), double(kPlaymatColor[1]),
                                              double(kPlaymatColor[2])}};
  for (std::size_t i = 0; i < scene.tiles.size(); ++i) {
    const TileSpec& spec = catalog.at(scene.tiles[i].spec_id);
    std::array<double, 3> fill{};
    std::array<double, 3> border{};
    for (int k = 0; k < 3; ++k) {
      fill[k] = spec.color[k];
      border[k] = kBorderShade * spec.color[k];
    }
    palette.push_back(fill);
    palette.push_back(border);

    const Polygon outer = tile_polygon(scene, scene.tiles[i], catalog);
    const Polygon inner = inset_convex(outer, kBorderWidthPx);
    paint(labels, sw, sh, outer, static_cast<std::uint16_t>(2 * i + 2));
    paint(labels, sw, sh, inner, static_cast<std::uint16_t>(2 * i + 1));
  }

  const Photometrics& ph = scene.photometrics;
  const bool do_gamma = ph.gamma != 1.0;
  Rng noise(scene.rng_seed);

  Image img(W, H);
  constexpr double inv = 1.0 / (kSuper * kSuper);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double acc[3] = {0.0, 0.0, 0.0};
      for (int sy = 0; sy < kSuper; ++sy) {
        const std::uint16_t* row = labels.data() + static_cast<std::size_t>(y * kSuper + sy) * sw + x * kSuper;
        for (int sx = 0; sx < kSuper; ++sx) {
          const auto& c = palette[row[sx]];
          acc[0] += c[0];
          acc[1] += c[1];
          acc[2] += c[2];
        }
      }
      const double shade = ph.shadow ? shadow_factor(*ph.shadow, x + 0.5, y + 0.5) : 1.0;
      std::uint8_t* out = img.px(x, y);
      for (int k = 0; k < 3; ++k) {
        double v = acc[k] * inv * ph.brightness_gain;
        v = std::min(v, 255.0);
        if (do_gamma) v = 255.0 * std::pow(v / 255.0, ph.gamma);
        v *= shade;
        if (ph.noise_sigma > 0.0) v += noise.normal(0.0, ph.noise_sigma);
        out[k] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return img;
}

}  // namespace tilesense::scenegen

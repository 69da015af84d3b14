#include "blox/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace blox {

namespace {

constexpr int kDiscSides = 64;
constexpr double kAreaEps = 1e-9;

double clamp(double v, double lo, double hi) {
  return std::max(lo, std::min(hi, v));
}

// Signed distance from a point to an axis-aligned rect boundary; negative
// inside.
double rect_signed_distance(const Footprint& rect, const Vec2& p) {
  const double dx = std::abs(p.x - rect.center.x) - rect.half_x;
  const double dy = std::abs(p.y - rect.center.y) - rect.half_y;
  if (dx > 0 || dy > 0) {
    return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  }
  return std::max(dx, dy);
}

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace

Footprint PlacedBlock::footprint() const {
  Footprint fp;
  fp.center = {center_mm.x, center_mm.y};
  if (is_disc()) {
    fp.kind = Footprint::Kind::Disc;
    fp.radius = extents_mm.x / 2;
  } else {
    fp.kind = Footprint::Kind::Rect;
    fp.half_x = extents_mm.x / 2;
    fp.half_y = extents_mm.y / 2;
  }
  return fp;
}

bool PlacedBlock::is_disc() const {
  return placement.orientation == Orientation::Upright;
}

double PlacedBlock::mass_kg(const BlockSpec& spec, double density_kg_m3) const {
  return spec.volume_mm3() * 1e-9 * density_kg_m3;
}

PlacedBlock make_placed_block(const BlockSpec& spec, const Placement& placement) {
  PlacedBlock b;
  b.placement = placement;
  b.extents_mm = effective_dims(spec, placement.orientation);
  b.center_mm = {placement.xy_mm.x, placement.xy_mm.y, b.extents_mm.z / 2};
  return b;
}

double polygon_area(const std::vector<Vec2>& poly) {
  double twice = 0;
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::abs(twice) / 2;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  if (pts.size() < 3) return pts;
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const Vec2& a, const Vec2& b) {
                          return a.x == b.x && a.y == b.y;
                        }),
            pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Vec2> hull(2 * pts.size());
  size_t k = 0;
  for (size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const size_t lower = k + 1;
  for (size_t i = pts.size() - 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject,
                              const std::vector<Vec2>& clip) {
  std::vector<Vec2> output = subject;
  for (size_t i = 0; i < clip.size() && !output.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % clip.size()];
    std::vector<Vec2> input;
    input.swap(output);
    for (size_t j = 0; j < input.size(); ++j) {
      const Vec2& cur = input[j];
      const Vec2& nxt = input[(j + 1) % input.size()];
      const double dc = cross(a, b, cur);
      const double dn = cross(a, b, nxt);
      if (dc >= 0) output.push_back(cur);
      if ((dc > 0 && dn < 0) || (dc < 0 && dn > 0)) {
        const double t = dc / (dc - dn);
        output.push_back(
            {cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
      }
    }
  }
  return output;
}

std::vector<Vec2> footprint_polygon(const Footprint& fp) {
  std::vector<Vec2> poly;
  if (fp.kind == Footprint::Kind::Rect) {
    poly = {{fp.center.x - fp.half_x, fp.center.y - fp.half_y},
            {fp.center.x + fp.half_x, fp.center.y - fp.half_y},
            {fp.center.x + fp.half_x, fp.center.y + fp.half_y},
            {fp.center.x - fp.half_x, fp.center.y + fp.half_y}};
    return poly;
  }
  poly.reserve(kDiscSides);
  for (int i = 0; i < kDiscSides; ++i) {
    const double a = 2 * std::numbers::pi * i / kDiscSides;
    poly.push_back({fp.center.x + fp.radius * std::cos(a),
                    fp.center.y + fp.radius * std::sin(a)});
  }
  return poly;
}

double inner_distance(const std::vector<Vec2>& poly, const Vec2& p) {
  if (poly.size() < 3) return -std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len < 1e-12) continue;
    best = std::min(best, cross(a, b, p) / len);
  }
  return best;
}

Vec2 nearest_edge_direction(const std::vector<Vec2>& poly, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  Vec2 dir{1, 0};
  for (size_t i = 0; i < poly.size(); ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % poly.size()];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len < 1e-12) continue;
    const double d = cross(a, b, p) / len;
    if (d < best) {
      best = d;
      dir = {(b.y - a.y) / len, -(b.x - a.x) / len};  // outward for CCW
    }
  }
  return dir;
}

double footprint_distance(const Footprint& a, const Footprint& b) {
  const bool ar = a.kind == Footprint::Kind::Rect;
  const bool br = b.kind == Footprint::Kind::Rect;
  if (ar && br) {
    const double dx =
        std::abs(a.center.x - b.center.x) - (a.half_x + b.half_x);
    const double dy =
        std::abs(a.center.y - b.center.y) - (a.half_y + b.half_y);
    return std::hypot(std::max(dx, 0.0), std::max(dy, 0.0));
  }
  if (!ar && !br) {
    const double d = std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
    return std::max(0.0, d - a.radius - b.radius);
  }
  const Footprint& rect = ar ? a : b;
  const Footprint& disc = ar ? b : a;
  return std::max(0.0, rect_signed_distance(rect, disc.center) - disc.radius);
}

double footprint_penetration(const Footprint& a, const Footprint& b) {
  const bool ar = a.kind == Footprint::Kind::Rect;
  const bool br = b.kind == Footprint::Kind::Rect;
  if (ar && br) {
    const double px =
        (a.half_x + b.half_x) - std::abs(a.center.x - b.center.x);
    const double py =
        (a.half_y + b.half_y) - std::abs(a.center.y - b.center.y);
    return std::min(px, py);
  }
  if (!ar && !br) {
    const double d = std::hypot(a.center.x - b.center.x, a.center.y - b.center.y);
    return a.radius + b.radius - d;
  }
  const Footprint& rect = ar ? a : b;
  const Footprint& disc = ar ? b : a;
  return disc.radius - rect_signed_distance(rect, disc.center);
}

bool footprint_overlap(const Footprint& a, const Footprint& b) {
  return footprint_penetration(a, b) > kAreaEps;
}

double surface_distance(const PlacedBlock& a, const PlacedBlock& b) {
  const double dz =
      std::max(0.0, std::max(a.bottom_z() - b.top_z(), b.bottom_z() - a.top_z()));
  const double dxy = footprint_distance(a.footprint(), b.footprint());
  return std::hypot(dxy, dz);
}

bool gravity_axis_overlap(const PlacedBlock& a, const PlacedBlock& b) {
  return a.bottom_z() <= b.top_z() && b.bottom_z() <= a.top_z();
}

bool in_collision(const PlacedBlock& a, const PlacedBlock& b, double tol) {
  const double z_pen =
      std::min(a.top_z(), b.top_z()) - std::max(a.bottom_z(), b.bottom_z());
  if (z_pen <= tol) return false;
  return footprint_penetration(a.footprint(), b.footprint()) > tol;
}

std::optional<ContactPatch> contact_patch(const PlacedBlock& upper,
                                          const PlacedBlock* lower, double tol,
                                          const Workspace& workspace) {
  const double lower_top = lower != nullptr ? lower->top_z() : 0.0;
  if (std::abs(upper.bottom_z() - lower_top) > tol) return std::nullopt;
  const std::vector<Vec2> upper_poly = footprint_polygon(upper.footprint());
  std::vector<Vec2> lower_poly;
  if (lower != nullptr) {
    lower_poly = footprint_polygon(lower->footprint());
  } else {
    const double w = workspace.half_extent_mm;
    lower_poly = {{-w, -w}, {w, -w}, {w, w}, {-w, w}};
  }
  std::vector<Vec2> patch = clip_convex(upper_poly, lower_poly);
  if (patch.size() < 3 || polygon_area(patch) <= kAreaEps) return std::nullopt;
  ContactPatch out;
  out.polygon = std::move(patch);
  return out;
}

}  // namespace blox

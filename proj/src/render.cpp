#include "blox/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

namespace blox {

namespace {

struct ViewFrame {
  // Returns (horizontal, vertical, depth) for a world point.
  ViewAxis axis;
  Vec3 map(const Vec3& p) const {
    switch (axis) {
      case ViewAxis::Front: return {p.x, p.z, p.y};   // camera on -y
      case ViewAxis::Side: return {p.y, p.z, -p.x};   // camera on +x
      case ViewAxis::Top: return {p.x, p.y, -p.z};    // camera above
    }
    return p;
  }
};

const std::map<std::string, Rgb>& palette() {
  static const std::map<std::string, Rgb> table = {
      {"red", {200, 60, 60}},     {"green", {70, 160, 90}},
      {"blue", {70, 100, 190}},   {"yellow", {210, 190, 70}},
      {"orange", {220, 140, 60}}, {"purple", {150, 90, 170}},
      {"brown", {140, 100, 70}},  {"gray", {130, 130, 130}},
      {"grey", {130, 130, 130}},  {"cyan", {80, 170, 180}},
      {"pink", {220, 140, 170}},  {"white", {235, 235, 235}},
      {"black", {50, 50, 50}},
  };
  return table;
}

constexpr Rgb kBackground{255, 255, 255};
constexpr Rgb kGround{90, 90, 90};
constexpr Rgb kHighlight{255, 0, 0};

}  // namespace

std::string view_axis_name(ViewAxis axis) {
  switch (axis) {
    case ViewAxis::Front: return "front";
    case ViewAxis::Side: return "side";
    case ViewAxis::Top: return "top";
  }
  return "front";
}

Rgb color_for_tag(const std::string& tag) {
  auto it = palette().find(tag);
  if (it != palette().end()) return it->second;
  const std::uint64_t h = fnv1a64(tag);
  auto entry = palette().begin();
  std::advance(entry, static_cast<long>(h % palette().size()));
  return entry->second;
}

OrthoView render_ortho(const Scene& scene, ViewAxis axis,
                       const std::set<int>& highlights,
                       const RenderConfig& config) {
  OrthoView view;
  view.axis = axis;
  view.highlights = highlights;
  Image& img = view.image;
  img.width = config.width_px;
  img.height = config.height_px;
  img.pixels.assign(static_cast<size_t>(img.width) * img.height, kBackground);

  const ViewFrame frame{axis};
  const double s = config.px_per_mm;
  const double h_min = -config.width_px / (2 * s);
  const double v_min =
      axis == ViewAxis::Top ? -config.height_px / (2 * s) : config.floor_mm;
  const double v_max = v_min + config.height_px / s;

  auto col_center = [&](int col) { return h_min + (col + 0.5) / s; };
  auto row_center = [&](int row) { return v_max - (row + 0.5) / s; };

  // Ground line at v = 0 for elevation views.
  if (axis != ViewAxis::Top) {
    const int row = static_cast<int>(std::floor((v_max - 0.0) * s));
    if (row >= 0 && row < img.height) {
      for (int c = 0; c < img.width; ++c) img.at(c, row) = kGround;
    }
  }

  // Painter's order: far along the view axis first.
  std::vector<int> order(scene.blocks.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return frame.map(scene.blocks[a].center_mm).z >
           frame.map(scene.blocks[b].center_mm).z;
  });

  for (int idx : order) {
    const PlacedBlock& block = scene.blocks[idx];
    const Vec3 c = frame.map(block.center_mm);
    const Vec3 e = frame.map(
        {block.extents_mm.x / 2, block.extents_mm.y / 2, block.extents_mm.z / 2});
    const double eh = std::abs(e.x), ev = std::abs(e.y);
    const Rgb fill = color_for_tag(block.placement.color);
    const bool disc = axis == ViewAxis::Top && block.is_disc();
    const double radius = block.extents_mm.x / 2;

    const int c0 = std::max(0, static_cast<int>(std::floor((c.x - eh - h_min) * s)));
    const int c1 = std::min(img.width - 1,
                            static_cast<int>(std::ceil((c.x + eh - h_min) * s)));
    const int r0 = std::max(0, static_cast<int>(std::floor((v_max - (c.y + ev)) * s)));
    const int r1 = std::min(img.height - 1,
                            static_cast<int>(std::ceil((v_max - (c.y - ev)) * s)));
    for (int row = r0; row <= r1; ++row) {
      for (int col = c0; col <= c1; ++col) {
        const double h = col_center(col);
        const double v = row_center(row);
        bool inside;
        if (disc) {
          inside = std::hypot(h - c.x, v - c.y) <= radius;
        } else {
          inside = std::abs(h - c.x) <= eh && std::abs(v - c.y) <= ev;
        }
        if (inside) img.at(col, row) = fill;
      }
    }
    if (highlights.count(idx) != 0) {
      // 2 px outline just inside the projected bounds.
      for (int row = r0; row <= r1; ++row) {
        for (int col = c0; col <= c1; ++col) {
          const double h = col_center(col);
          const double v = row_center(row);
          bool edge;
          if (disc) {
            const double d = std::hypot(h - c.x, v - c.y);
            edge = d <= radius && d >= radius - 2.0 / s;
          } else {
            const bool in = std::abs(h - c.x) <= eh && std::abs(v - c.y) <= ev;
            const bool core = std::abs(h - c.x) <= eh - 2.0 / s &&
                              std::abs(v - c.y) <= ev - 2.0 / s;
            edge = in && !core;
          }
          if (edge) img.at(col, row) = kHighlight;
        }
      }
    }
  }
  return view;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " +
                    std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size() * 3);
  for (const Rgb& px : image.pixels) {
    out.push_back(static_cast<char>(px.r));
    out.push_back(static_cast<char>(px.g));
    out.push_back(static_cast<char>(px.b));
  }
  return out;
}

void write_ppm(const Image& image, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write image: " + path);
  out << encode_ppm(image);
}

namespace {

void append_vertex(std::string& out, double x, double y, double z) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "v %.4f %.4f %.4f\n", x, y, z);
  out += buf;
}

void append_face(std::string& out, int a, int b, int c) {
  out += "f " + std::to_string(a) + " " + std::to_string(b) + " " +
         std::to_string(c) + "\n";
}

}  // namespace

std::string scene_to_obj(const Scene& scene) {
  constexpr int kSides = 24;
  std::string out;
  int base = 1;
  for (size_t i = 0; i < scene.blocks.size(); ++i) {
    const PlacedBlock& b = scene.blocks[i];
    out += "o block_" + std::to_string(i) + "\n";
    if (b.placement.orientation == Orientation::Upright ||
        b.placement.orientation == Orientation::LyingX ||
        b.placement.orientation == Orientation::LyingY) {
      // 24-gon prism along the cylinder axis.
      const Orientation o = b.placement.orientation;
      const double radius =
          (o == Orientation::Upright ? b.extents_mm.x : b.extents_mm.y) / 2;
      const double half_len = (o == Orientation::Upright  ? b.extents_mm.z
                               : o == Orientation::LyingX ? b.extents_mm.x
                                                          : b.extents_mm.y) /
                              2;
      auto to_world = [&](double u, double v, double axial) {
        // (u, v) in the cap plane, axial along the cylinder axis.
        switch (o) {
          case Orientation::LyingX:
            return Vec3{b.center_mm.x + axial, b.center_mm.y + u,
                        b.center_mm.z + v};
          case Orientation::LyingY:
            return Vec3{b.center_mm.x + u, b.center_mm.y + axial,
                        b.center_mm.z + v};
          default:
            return Vec3{b.center_mm.x + u, b.center_mm.y + v,
                        b.center_mm.z + axial};
        }
      };
      for (int k = 0; k < kSides; ++k) {
        const double a = 2 * std::numbers::pi * k / kSides;
        const Vec3 lo = to_world(radius * std::cos(a), radius * std::sin(a),
                                 -half_len);
        append_vertex(out, lo.x, lo.y, lo.z);
      }
      for (int k = 0; k < kSides; ++k) {
        const double a = 2 * std::numbers::pi * k / kSides;
        const Vec3 hi = to_world(radius * std::cos(a), radius * std::sin(a),
                                 half_len);
        append_vertex(out, hi.x, hi.y, hi.z);
      }
      const Vec3 lo_c = to_world(0, 0, -half_len);
      const Vec3 hi_c = to_world(0, 0, half_len);
      append_vertex(out, lo_c.x, lo_c.y, lo_c.z);
      append_vertex(out, hi_c.x, hi_c.y, hi_c.z);
      const int lo0 = base, hi0 = base + kSides;
      const int cl = base + 2 * kSides, ch = cl + 1;
      for (int k = 0; k < kSides; ++k) {
        const int k1 = (k + 1) % kSides;
        append_face(out, lo0 + k, lo0 + k1, hi0 + k1);
        append_face(out, lo0 + k, hi0 + k1, hi0 + k);
        append_face(out, cl, lo0 + k1, lo0 + k);
        append_face(out, ch, hi0 + k, hi0 + k1);
      }
      base += 2 * kSides + 2;
    } else {
      const double hx = b.extents_mm.x / 2, hy = b.extents_mm.y / 2,
                   hz = b.extents_mm.z / 2;
      for (int corner = 0; corner < 8; ++corner) {
        append_vertex(out, b.center_mm.x + ((corner & 1) ? hx : -hx),
                      b.center_mm.y + ((corner & 2) ? hy : -hy),
                      b.center_mm.z + ((corner & 4) ? hz : -hz));
      }
      static const int faces[12][3] = {
          {0, 2, 3}, {0, 3, 1}, {4, 5, 7}, {4, 7, 6},  // bottom, top
          {0, 1, 5}, {0, 5, 4}, {2, 6, 7}, {2, 7, 3},  // -y, +y
          {0, 4, 6}, {0, 6, 2}, {1, 3, 7}, {1, 7, 5},  // -x, +x
      };
      for (const auto& f : faces) {
        append_face(out, base + f[0], base + f[1], base + f[2]);
      }
      base += 8;
    }
  }
  return out;
}

void export_mesh(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mesh: " + path);
  out << scene_to_obj(scene);
}

}  // namespace blox

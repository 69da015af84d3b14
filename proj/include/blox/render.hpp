#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "blox/statics.hpp"

namespace blox {

enum class ViewAxis { Front, Side, Top };
std::string view_axis_name(ViewAxis axis);

struct RenderConfig {
  double px_per_mm = 1.0;
  int width_px = 440;
  int height_px = 400;
  // World window: horizontal axis spans [-span/2, span/2] around 0; the
  // vertical axis starts at floor_mm.
  double floor_mm = -20.0;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<Rgb> pixels;  // row-major, top row first

  Rgb& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
  const Rgb& at(int x, int y) const {
    return pixels[static_cast<size_t>(y) * width + x];
  }
};

struct OrthoView {
  ViewAxis axis = ViewAxis::Front;
  Image image;
  std::set<int> highlights;
};

Rgb color_for_tag(const std::string& tag);

// Deterministic flat-shaded orthographic projection, painter's order along
// the view axis; highlighted blocks get a red outline.
OrthoView render_ortho(const Scene& scene, ViewAxis axis,
                       const std::set<int>& highlights = {},
                       const RenderConfig& config = {});

std::string encode_ppm(const Image& image);
void write_ppm(const Image& image, const std::string& path);

// Wavefront-style text mesh: 8-vertex boxes, cylinders as 24-gon prisms, one
// object group per block.
std::string scene_to_obj(const Scene& scene);
void export_mesh(const Scene& scene, const std::string& path);

}  // namespace blox

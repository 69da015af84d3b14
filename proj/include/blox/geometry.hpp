#pragma once

#include <optional>
#include <vector>

#include "blox/catalog.hpp"

namespace blox {

// z-projected shape of a block. Lying cylinders use their rectangular shadow
// (conservative: line contact becomes a thin rectangle).
struct Footprint {
  enum class Kind { Rect, Disc };
  Kind kind = Kind::Rect;
  Vec2 center;
  double half_x = 0;  // Rect half extents
  double half_y = 0;
  double radius = 0;  // Disc
};

struct PlacedBlock {
  Placement placement;
  Vec3 extents_mm;
  Vec3 center_mm;  // z resolved by statics

  double bottom_z() const { return center_mm.z - extents_mm.z / 2; }
  double top_z() const { return center_mm.z + extents_mm.z / 2; }
  Footprint footprint() const;
  bool is_disc() const;
  double mass_kg(const BlockSpec& spec, double density_kg_m3) const;
};

PlacedBlock make_placed_block(const BlockSpec& spec, const Placement& placement);

// Convex 2D region where a block's bottom face meets a support's top face.
// Discs are approximated by inscribed 64-gons.
struct ContactPatch {
  std::vector<Vec2> polygon;  // CCW
  int support_index = -1;     // -1 = Ground
};

// 2D helpers on convex CCW polygons.
double polygon_area(const std::vector<Vec2>& poly);
std::vector<Vec2> convex_hull(std::vector<Vec2> points);
std::vector<Vec2> clip_convex(const std::vector<Vec2>& subject,
                              const std::vector<Vec2>& clip);
std::vector<Vec2> footprint_polygon(const Footprint& fp);
// Signed distance from a point to the boundary of a convex CCW polygon;
// positive inside. Degenerate polygons give -inf.
double inner_distance(const std::vector<Vec2>& poly, const Vec2& p);
// Outward direction from p toward the nearest polygon edge.
Vec2 nearest_edge_direction(const std::vector<Vec2>& poly, const Vec2& p);

// In-plane distance between two footprints (0 if overlapping/touching).
double footprint_distance(const Footprint& a, const Footprint& b);
// Strictly positive-measure overlap of two footprints.
bool footprint_overlap(const Footprint& a, const Footprint& b);
// Depth of in-plane interpenetration (<= 0 when separated/touching).
double footprint_penetration(const Footprint& a, const Footprint& b);

// 3D surface-to-surface distance; 0 if touching or interpenetrating.
double surface_distance(const PlacedBlock& a, const PlacedBlock& b);

// True iff the closed z-intervals intersect.
bool gravity_axis_overlap(const PlacedBlock& a, const PlacedBlock& b);

// True iff volumetric interpenetration exceeds tol (tol absorbs exact face
// sharing from stacking).
bool in_collision(const PlacedBlock& a, const PlacedBlock& b, double tol);

// Contact region between upper's bottom face and lower's top face, when the
// faces are coplanar within tol. Pass lower == nullptr for Ground (top face
// is the whole workspace at z = 0).
std::optional<ContactPatch> contact_patch(const PlacedBlock& upper,
                                          const PlacedBlock* lower, double tol,
                                          const Workspace& workspace = {});

}  // namespace blox

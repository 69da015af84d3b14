#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace blox {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Shape { Cuboid, Cylinder };

// One catalog entry. Cuboid dims are (length, width, height), cylinder dims
// are (diameter, height), both in millimeters.
struct BlockSpec {
  std::string id;
  Shape shape = Shape::Cuboid;
  std::vector<double> dims_mm;
  int count = 0;

  double volume_mm3() const;
};

// Axis-aligned orientations only: cuboids pick one of the 6 permutations of
// (l, w, h) onto (x, y, z); cylinders are upright or lying along x / y.
enum class Orientation {
  LWH,  // l->x, w->y, h->z (canonical)
  LHW,
  WLH,
  WHL,
  HLW,
  HWL,
  Upright,
  LyingX,
  LyingY,
};

bool orientation_valid_for(Shape shape, Orientation o);
std::string orientation_name(Orientation o);
std::optional<Orientation> orientation_from_name(const std::string& name);

struct Vec2 {
  double x = 0;
  double y = 0;
};

struct Vec3 {
  double x = 0;
  double y = 0;
  double z = 0;
};

struct Placement {
  std::string block_id;
  Orientation orientation = Orientation::LWH;
  Vec2 xy_mm;
  std::string color;
};

struct AssemblyPlan {
  std::string prompt;
  std::string catalog_hash;  // empty = unchecked
  std::vector<Placement> placements;
};

struct Workspace {
  double half_extent_mm = 200.0;

  bool contains(const Vec2& p) const {
    return p.x >= -half_extent_mm && p.x <= half_extent_mm &&
           p.y >= -half_extent_mm && p.y <= half_extent_mm;
  }
};

using Catalog = std::vector<BlockSpec>;

// World-axis extents (x, y, z) of a spec under an orientation.
Vec3 effective_dims(const BlockSpec& spec, Orientation o);

const BlockSpec* find_spec(const Catalog& catalog, const std::string& id);

// File IO. Throws ParseError on malformed documents and ValidationError on
// invariant violations (non-positive dims, duplicate ids, bad counts).
Catalog load_catalog(const std::string& path);
Catalog parse_catalog(const std::string& json_text);
std::string catalog_to_json(const Catalog& catalog);
void save_catalog(const Catalog& catalog, const std::string& path);

// Stable content hash of the catalog document (FNV-1a over canonical JSON).
std::string catalog_hash(const Catalog& catalog);

AssemblyPlan load_plan(const std::string& path);
AssemblyPlan parse_plan(const std::string& json_text);
std::string plan_to_json(const AssemblyPlan& plan);
void save_plan(const AssemblyPlan& plan, const std::string& path);
std::string plan_hash(const AssemblyPlan& plan);

struct Violation {
  std::string code;  // "unavailable block", "count exceeded", ...
  std::string detail;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Structural executability check: unknown ids, count overuse, out-of-bounds
// coordinates, orientations invalid for the shape. Violations are data.
ValidationReport validate_plan(const AssemblyPlan& plan, const Catalog& catalog,
                               const Workspace& workspace = {});

std::uint64_t fnv1a64(const std::string& data);
std::string fnv1a64_hex(const std::string& data);

}  // namespace blox

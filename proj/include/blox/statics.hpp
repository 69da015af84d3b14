#pragma once

#include <optional>
#include <string>
#include <vector>

#include "blox/catalog.hpp"
#include "blox/geometry.hpp"

namespace blox {

struct SimParams {
  double density_kg_m3 = 1000.0;
  double lateral_friction = 0.5;   // carried for dynamic backends, unused here
  double spinning_friction = 0.2;  // carried for dynamic backends, unused here
  double gravity_m_s2 = -9.81;
  double pos_threshold_mm = 10.0;
  double rot_threshold_rad = 0.1;
  double com_margin_mm = 1.0;
  double contact_tol_mm = 0.5;
  Workspace workspace;
};

struct StabilityReport {
  bool stable = true;
  std::optional<int> offender;
  std::vector<double> displacement_mm;
  std::string diagnostic;
  Vec2 tip_direction;  // from failing COM toward the nearest hull edge
  std::string front_view_path;
  std::string side_view_path;
};

struct DropError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Settled world state. Blocks are frozen once placed; support_graph edges go
// upper -> supports (index -1 = Ground).
struct Scene {
  std::vector<PlacedBlock> blocks;
  std::vector<std::vector<int>> supports;  // per block; -1 for Ground

  bool empty() const { return blocks.empty(); }
};

// Recompute support edges from poses (coplanar contact + overlapping
// footprints within tol).
void rebuild_supports(Scene& scene, const SimParams& params);

// Lower a new block at fixed (x, y) until first support contact; z is
// derived. Throws DropError on out-of-workspace placements.
Scene drop_settle(const Scene& scene, const Placement& placement,
                  const BlockSpec& spec, const SimParams& params);

// Quasi-static verdict for one block: the combined COM of the block plus
// everything it transitively carries (equal split across multiple supports)
// must project strictly inside its support polygon shrunk by com_margin_mm.
StabilityReport check_block_stability(const Scene& scene, int idx,
                                      const Catalog& catalog,
                                      const SimParams& params);

// Whole-scene verdict, bottom-up; offender = lowest-index failing block.
StabilityReport check_scene_stability(const Scene& scene, const Catalog& catalog,
                                      const SimParams& params);

struct SettleResult {
  Scene scene;
  std::vector<StabilityReport> reports;  // one per applied placement
};

SettleResult settle_plan(const AssemblyPlan& plan, const Catalog& catalog,
                         const SimParams& params, bool fail_fast = false);

// Optional scene dump for external visualization.
std::string scene_to_json(const Scene& scene);

}  // namespace blox

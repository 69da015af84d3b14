#include "blox/statics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "json.hpp"

namespace blox {

namespace {

const BlockSpec& spec_for(const Catalog& catalog, const PlacedBlock& block) {
  const BlockSpec* spec = find_spec(catalog, block.placement.block_id);
  if (spec == nullptr) {
    throw ValidationError("unknown block id '" + block.placement.block_id + "'");
  }
  return *spec;
}

// Fraction of each block's weight that passes through block idx, with a
// block's carried load split equally among its supports (Ground is a sink).
std::vector<double> load_flows(const Scene& scene, int idx) {
  const int n = static_cast<int>(scene.blocks.size());
  std::vector<double> flow(n, -1.0);
  std::function<double(int)> f = [&](int j) -> double {
    if (j == idx) return 1.0;
    if (flow[j] >= 0) return flow[j];
    flow[j] = 0.0;  // cycle guard; support graphs are acyclic by construction
    const auto& sup = scene.supports[j];
    if (!sup.empty()) {
      double acc = 0;
      for (int s : sup) {
        if (s >= 0) acc += f(s);
      }
      flow[j] = acc / static_cast<double>(sup.size());
    }
    return flow[j];
  };
  for (int j = 0; j < n; ++j) flow[j] = f(j);
  flow[idx] = 1.0;
  return flow;
}

}  // namespace

void rebuild_supports(Scene& scene, const SimParams& params) {
  const int n = static_cast<int>(scene.blocks.size());
  scene.supports.assign(n, {});
  for (int i = 0; i < n; ++i) {
    const PlacedBlock& b = scene.blocks[i];
    if (std::abs(b.bottom_z()) <= params.contact_tol_mm) {
      scene.supports[i].push_back(-1);
    }
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const PlacedBlock& s = scene.blocks[j];
      if (std::abs(b.bottom_z() - s.top_z()) <= params.contact_tol_mm &&
          footprint_overlap(b.footprint(), s.footprint())) {
        scene.supports[i].push_back(j);
      }
    }
  }
}

Scene drop_settle(const Scene& scene, const Placement& placement,
                  const BlockSpec& spec, const SimParams& params) {
  if (!params.workspace.contains(placement.xy_mm)) {
    throw DropError("placement out of workspace: (" +
                    std::to_string(placement.xy_mm.x) + ", " +
                    std::to_string(placement.xy_mm.y) + ")");
  }
  PlacedBlock block = make_placed_block(spec, placement);
  double base_z = 0.0;
  const Footprint fp = block.footprint();
  for (const PlacedBlock& other : scene.blocks) {
    if (footprint_overlap(fp, other.footprint())) {
      base_z = std::max(base_z, other.top_z());
    }
  }
  block.center_mm.z = base_z + block.extents_mm.z / 2;
  Scene out = scene;
  out.blocks.push_back(block);
  rebuild_supports(out, params);
  return out;
}

StabilityReport check_block_stability(const Scene& scene, int idx,
                                      const Catalog& catalog,
                                      const SimParams& params) {
  if (idx < 0 || idx >= static_cast<int>(scene.blocks.size())) {
    throw std::out_of_range("block index out of range");
  }
  StabilityReport report;
  report.displacement_mm.assign(scene.blocks.size(), 0.0);

  const PlacedBlock& block = scene.blocks[idx];
  std::vector<Vec2> patch_points;
  for (int s : scene.supports[idx]) {
    const PlacedBlock* lower = s >= 0 ? &scene.blocks[s] : nullptr;
    auto patch =
        contact_patch(block, lower, params.contact_tol_mm, params.workspace);
    if (patch) {
      patch_points.insert(patch_points.end(), patch->polygon.begin(),
                          patch->polygon.end());
    }
  }
  if (patch_points.empty()) {
    report.stable = false;
    report.offender = idx;
    report.diagnostic =
        "block " + std::to_string(idx) + " has no support contact";
    report.displacement_mm[idx] = params.pos_threshold_mm;
    return report;
  }

  const std::vector<double> flow = load_flows(scene, idx);
  double mass = 0;
  Vec2 com{0, 0};
  for (size_t j = 0; j < scene.blocks.size(); ++j) {
    if (flow[j] <= 0) continue;
    const PlacedBlock& b = scene.blocks[j];
    const double m = flow[j] * b.mass_kg(spec_for(catalog, b), params.density_kg_m3);
    mass += m;
    com.x += m * b.center_mm.x;
    com.y += m * b.center_mm.y;
  }
  com.x /= mass;
  com.y /= mass;

  const std::vector<Vec2> hull = convex_hull(patch_points);
  const double dist = inner_distance(hull, com);
  if (dist > params.com_margin_mm) {
    return report;
  }
  report.stable = false;
  report.offender = idx;
  report.tip_direction = nearest_edge_direction(hull, com);
  report.displacement_mm[idx] = params.pos_threshold_mm;
  std::ostringstream msg;
  msg << "COM outside support polygon of block " << idx << " (margin "
      << dist << " mm, tip direction " << report.tip_direction.x << ", "
      << report.tip_direction.y << ")";
  report.diagnostic = msg.str();
  return report;
}

StabilityReport check_scene_stability(const Scene& scene, const Catalog& catalog,
                                      const SimParams& params) {
  StabilityReport report;
  report.displacement_mm.assign(scene.blocks.size(), 0.0);
  for (int i = 0; i < static_cast<int>(scene.blocks.size()); ++i) {
    StabilityReport block_report = check_block_stability(scene, i, catalog, params);
    if (!block_report.stable) return block_report;
  }
  return report;
}

SettleResult settle_plan(const AssemblyPlan& plan, const Catalog& catalog,
                         const SimParams& params, bool fail_fast) {
  SettleResult result;
  for (const Placement& p : plan.placements) {
    const BlockSpec* spec = find_spec(catalog, p.block_id);
    if (spec == nullptr) {
      throw ValidationError("unknown block id '" + p.block_id + "'");
    }
    result.scene = drop_settle(result.scene, p, *spec, params);
    StabilityReport report = check_scene_stability(result.scene, catalog, params);
    const bool stable = report.stable;
    result.reports.push_back(std::move(report));
    if (fail_fast && !stable) break;
  }
  return result;
}

std::string scene_to_json(const Scene& scene) {
  nlohmann::json blocks = nlohmann::json::array();
  for (size_t i = 0; i < scene.blocks.size(); ++i) {
    const PlacedBlock& b = scene.blocks[i];
    blocks.push_back({
        {"block_id", b.placement.block_id},
        {"orientation", orientation_name(b.placement.orientation)},
        {"color", b.placement.color},
        {"center_mm", {b.center_mm.x, b.center_mm.y, b.center_mm.z}},
        {"extents_mm", {b.extents_mm.x, b.extents_mm.y, b.extents_mm.z}},
        {"supports", scene.supports[i]},
    });
  }
  nlohmann::json doc = {{"schema_version", 1}, {"blocks", blocks}};
  return doc.dump(2) + "\n";
}

}  // namespace blox

#include "blox/redesign.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"

namespace blox {

namespace {

// Blocks transitively supported by idx. They are placed after idx, so they
// must not act as landing surfaces when idx itself is tentatively re-dropped.
std::vector<char> dependents_of(const Scene& scene, int idx) {
  const int n = static_cast<int>(scene.blocks.size());
  std::vector<char> dep(n, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int j = 0; j < n; ++j) {
      if (dep[j] || j == idx) continue;
      for (int s : scene.supports[j]) {
        if (s == idx || (s >= 0 && dep[s])) {
          dep[j] = 1;
          changed = true;
          break;
        }
      }
    }
  }
  return dep;
}

// Scene with idx's dependents removed; returns the remapped index of idx.
std::pair<Scene, int> without_dependents(const Scene& scene, int idx,
                                         const SimParams& sim) {
  const std::vector<char> dep = dependents_of(scene, idx);
  Scene out;
  int remapped = 0;
  for (int j = 0; j < static_cast<int>(scene.blocks.size()); ++j) {
    if (dep[j]) continue;
    if (j == idx) remapped = static_cast<int>(out.blocks.size());
    out.blocks.push_back(scene.blocks[j]);
  }
  rebuild_supports(out, sim);
  return {std::move(out), remapped};
}

// Re-drop only block idx at xy with every other block frozen. Returns nullopt
// when xy leaves the workspace.
std::optional<Scene> probe_scene(const Scene& scene, int idx, const Vec2& xy,
                                 const SimParams& sim) {
  if (!sim.workspace.contains(xy)) return std::nullopt;
  Scene out = scene;
  PlacedBlock& block = out.blocks[idx];
  block.placement.xy_mm = xy;
  block.center_mm.x = xy.x;
  block.center_mm.y = xy.y;
  double base_z = 0.0;
  const Footprint fp = block.footprint();
  for (int j = 0; j < static_cast<int>(out.blocks.size()); ++j) {
    if (j == idx) continue;
    if (footprint_overlap(fp, out.blocks[j].footprint())) {
      base_z = std::max(base_z, out.blocks[j].top_z());
    }
  }
  block.center_mm.z = base_z + block.extents_mm.z / 2;
  rebuild_supports(out, sim);
  return out;
}

// Criterion (1): closer than the collision threshold to a block it overlaps
// in z by more than the contact tolerance (face-sharing stacks are exempt).
bool proximity_violated(const Scene& scene, int idx, double threshold,
                        const SimParams& sim) {
  const PlacedBlock& b = scene.blocks[idx];
  for (int j = 0; j < static_cast<int>(scene.blocks.size()); ++j) {
    if (j == idx) continue;
    const PlacedBlock& o = scene.blocks[j];
    const double z_overlap =
        std::min(b.top_z(), o.top_z()) - std::max(b.bottom_z(), o.bottom_z());
    if (z_overlap <= sim.contact_tol_mm) continue;
    if (surface_distance(b, o) < threshold) return true;
  }
  return false;
}

bool collision_violated(const Scene& scene, int idx, const SimParams& sim) {
  const PlacedBlock& b = scene.blocks[idx];
  for (int j = 0; j < static_cast<int>(scene.blocks.size()); ++j) {
    if (j != idx && in_collision(b, scene.blocks[j], sim.contact_tol_mm)) {
      return true;
    }
  }
  return false;
}

// True when block ridx stays stable when re-dropped at xy plus every sampled
// offset within the probe radius (out-of-workspace probes are skipped).
bool probes_all_stable(const Scene& reduced, int ridx, const Vec2& xy,
                       const Catalog& catalog, const RedesignParams& params,
                       const SimParams& sim) {
  for (const Vec2& off : sample_offsets(params)) {
    if (std::hypot(off.x, off.y) > params.instability_probe_radius_mm + 1e-9) {
      continue;
    }
    auto probed =
        probe_scene(reduced, ridx, {xy.x + off.x, xy.y + off.y}, sim);
    if (!probed) continue;
    if (!check_block_stability(*probed, ridx, catalog, sim).stable) {
      return false;
    }
  }
  return true;
}

}  // namespace

std::string criterion_name(Criterion c) {
  switch (c) {
    case Criterion::Proximity: return "proximity";
    case Criterion::Collision: return "collision";
    case Criterion::NearbyInstability: return "nearby_instability";
  }
  return "proximity";
}

std::vector<Vec2> sample_offsets(const RedesignParams& params) {
  std::vector<Vec2> offsets;
  offsets.reserve(params.circles * params.points_per_circle + 1);
  for (int c = 0; c < params.circles; ++c) {
    const double r =
        params.circles == 1
            ? params.radius_min_mm
            : params.radius_min_mm + (params.radius_max_mm - params.radius_min_mm) *
                                         c / (params.circles - 1);
    for (int k = 0; k < params.points_per_circle; ++k) {
      const double a = 2 * std::numbers::pi * k / params.points_per_circle;
      offsets.push_back({r * std::cos(a), r * std::sin(a)});
    }
  }
  offsets.push_back({0, 0});
  return offsets;
}

std::set<Criterion> needs_perturbation(const Scene& scene, int idx,
                                       const Catalog& catalog,
                                       const RedesignParams& params,
                                       const SimParams& sim) {
  std::set<Criterion> out;
  if (proximity_violated(scene, idx, params.collision_threshold_mm, sim)) {
    out.insert(Criterion::Proximity);
  }
  if (collision_violated(scene, idx, sim)) {
    out.insert(Criterion::Collision);
  }
  // Criterion (3) probes re-settle only this block; its dependents are
  // excluded (they do not exist yet when the block is placed), everything
  // else stays frozen.
  const auto [reduced, ridx] = without_dependents(scene, idx, sim);
  if (!probes_all_stable(reduced, ridx, scene.blocks[idx].placement.xy_mm,
                         catalog, params, sim)) {
    out.insert(Criterion::NearbyInstability);
  }
  return out;
}

PerturbResult perturb_block(const Scene& scene, int idx, const Catalog& catalog,
                            const RedesignParams& params, const SimParams& sim) {
  const Vec2 nominal = scene.blocks[idx].placement.xy_mm;
  const double nominal_z = scene.blocks[idx].center_mm.z;
  PerturbResult result;
  Vec2 acc{0, 0};
  const auto [reduced, ridx] = without_dependents(scene, idx, sim);
  for (const Vec2& off : sample_offsets(params)) {
    const Vec2 xy{nominal.x + off.x, nominal.y + off.y};
    auto probed = probe_scene(reduced, ridx, xy, sim);
    if (!probed) continue;
    // Candidates that change the support level are not the same design.
    if (std::abs(probed->blocks[ridx].center_mm.z - nominal_z) >
        sim.contact_tol_mm) {
      continue;
    }
    if (collision_violated(*probed, ridx, sim)) continue;
    if (proximity_violated(*probed, ridx, params.collision_threshold_mm, sim)) {
      continue;
    }
    if (!check_scene_stability(*probed, catalog, sim).stable) continue;
    // The candidate must also clear criterion (3); averaging positions that
    // are merely clear themselves decays toward the probe boundary without
    // ever crossing it, so the visit cap would hit before the fixpoint.
    if (!probes_all_stable(*probed, ridx, xy, catalog, params, sim)) continue;
    acc.x += xy.x;
    acc.y += xy.y;
    ++result.feasible_count;
  }
  if (result.feasible_count > 0) {
    result.new_xy = Vec2{acc.x / result.feasible_count,
                         acc.y / result.feasible_count};
  }
  return result;
}

RedesignResult redesign(const AssemblyPlan& plan, const Catalog& catalog,
                        const RedesignParams& params, const SimParams& sim) {
  RedesignResult out;
  out.plan = plan;
  const int n = static_cast<int>(plan.placements.size());
  out.report.visits.assign(n, 0);

  Scene scene = settle_plan(out.plan, catalog, sim).scene;
  bool capped = false;
  while (!capped) {
    int adjustments = 0;
    for (int i = 0; i < n && !capped; ++i) {
      const std::set<Criterion> crits =
          needs_perturbation(scene, i, catalog, params, sim);
      if (crits.empty()) continue;
      if (out.report.visits[i] >= params.max_visits_per_block) {
        capped = true;
        break;
      }
      ++out.report.visits[i];
      const PerturbResult moved = perturb_block(scene, i, catalog, params, sim);
      if (!moved.new_xy) {
        if (std::find(out.report.infeasible.begin(), out.report.infeasible.end(),
                      i) == out.report.infeasible.end()) {
          out.report.infeasible.push_back(i);
        }
        continue;
      }
      const Vec2 old_xy = out.plan.placements[i].xy_mm;
      if (std::hypot(moved.new_xy->x - old_xy.x, moved.new_xy->y - old_xy.y) <
          1e-9) {
        continue;
      }
      out.plan.placements[i].xy_mm = *moved.new_xy;
      out.report.adjusted.push_back({i, old_xy, *moved.new_xy, *crits.begin()});
      scene = settle_plan(out.plan, catalog, sim).scene;
      ++adjustments;
    }
    if (capped) break;
    if (adjustments == 0) {
      out.report.converged = true;
      break;
    }
  }
  out.report.final_stability = check_scene_stability(scene, catalog, sim);
  return out;
}

std::string RedesignReport::to_json() const {
  nlohmann::json adj = nlohmann::json::array();
  for (const Adjustment& a : adjusted) {
    adj.push_back({
        {"block", a.block},
        {"old_xy", {a.old_xy.x, a.old_xy.y}},
        {"new_xy", {a.new_xy.x, a.new_xy.y}},
        {"criterion", criterion_name(a.triggered)},
    });
  }
  nlohmann::json doc = {
      {"schema_version", 1},
      {"converged", converged},
      {"visits", visits},
      {"infeasible", infeasible},
      {"adjusted", adj},
      {"final_stable", final_stability.stable},
  };
  return doc.dump(2) + "\n";
}

}  // namespace blox

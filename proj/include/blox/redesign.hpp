#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "blox/statics.hpp"

namespace blox {

struct RedesignParams {
  double collision_threshold_mm = 5.0;
  int circles = 10;
  int points_per_circle = 8;
  double radius_min_mm = 1.0;
  double radius_max_mm = 15.0;
  int max_visits_per_block = 10;
  double instability_probe_radius_mm = 15.0;
};

enum class Criterion { Proximity, Collision, NearbyInstability };
std::string criterion_name(Criterion c);

struct Adjustment {
  int block = 0;
  Vec2 old_xy;
  Vec2 new_xy;
  Criterion triggered = Criterion::Proximity;
};

struct RedesignReport {
  std::vector<Adjustment> adjusted;
  std::vector<int> visits;      // per block
  bool converged = false;
  std::vector<int> infeasible;  // blocks with zero feasible samples
  StabilityReport final_stability;

  std::string to_json() const;
};

// Deterministic sampling grid: points_per_circle points on each of `circles`
// evenly spaced radii over [radius_min, radius_max], angles starting at 0,
// plus the nominal position (0, 0) appended last.
std::vector<Vec2> sample_offsets(const RedesignParams& params);

// Flagging criteria for one settled block.
std::set<Criterion> needs_perturbation(const Scene& scene, int idx,
                                       const Catalog& catalog,
                                       const RedesignParams& params,
                                       const SimParams& sim);

struct PerturbResult {
  std::optional<Vec2> new_xy;  // nullopt = infeasible, block left at nominal
  int feasible_count = 0;
};

// Move a flagged block to the mean of the sampled positions that are stable,
// collision-free, proximity-clear, and rest at the nominal support level.
PerturbResult perturb_block(const Scene& scene, int idx, const Catalog& catalog,
                            const RedesignParams& params, const SimParams& sim);

struct RedesignResult {
  AssemblyPlan plan;
  RedesignReport report;
};

RedesignResult redesign(const AssemblyPlan& plan, const Catalog& catalog,
                        const RedesignParams& params, const SimParams& sim);

}  // namespace blox

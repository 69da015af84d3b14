#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "blox/designer.hpp"
#include "blox/redesign.hpp"
#include "blox/statics.hpp"

namespace blox {

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic Gaussian placement noise. The normal variates are hand-rolled
// (Box-Muller over mt19937_64 bits) so sequences are identical across
// standard libraries; samples are truncated at 3 sigma by resampling.
class NoiseModel {
 public:
  explicit NoiseModel(double sigma_mm, std::uint64_t seed);
  Vec2 next_offset();
  double sigma_mm() const { return sigma_mm_; }

 private:
  double next_normal();
  double next_uniform();  // in (0, 1)

  double sigma_mm_;
  std::mt19937_64 rng_;
  double spare_ = 0;
  bool has_spare_ = false;
};

struct TrialMetrics {
  int placed = 0;   // blocks that survived to the end of the trial
  int correct = 0;  // surviving blocks matching the noiseless reference
  int fallen = 0;   // blocks removed as unstable (or undroppable)
  int total = 0;    // placements in the plan
  bool full_completion = false;

  double fraction_correct() const {
    return total == 0 ? 1.0 : static_cast<double>(correct) / total;
  }
};

struct TrialResult {
  TrialMetrics metrics;
  Scene final_scene;
  std::vector<int> surviving;       // original placement index per scene block
  std::vector<bool> block_correct;  // per original placement
};

// One noisy build: each placement's (x, y) gets an independent Gaussian
// offset, blocks drop in order, and any block that goes unstable is removed
// as fallen (cascading until the scene is stable). A block is correct when
// its settled pose is within pos_threshold_mm of the noiseless reference and
// it rests on the same supports.
TrialResult simulate_trial(const AssemblyPlan& plan, const Catalog& catalog,
                           const SimParams& sim, double sigma_mm,
                           std::uint64_t seed);

struct AblationConfig {
  int trials = 100;
  double sigma_mm = 3.0;
  std::uint64_t base_seed = 0;
  RedesignParams redesign_params;
};

struct ArmSummary {
  std::string name;
  std::vector<TrialMetrics> per_trial;
  double mean_fraction_correct = 0;
  double completion_rate = 0;
};

struct AblationResult {
  ArmSummary baseline;    // the plan as given
  ArmSummary redesigned;  // after the perturbation pass
  AssemblyPlan redesigned_plan;
  RedesignReport redesign_report;
};

// Paired comparison: trial t uses seed base_seed + t in both arms, so the
// two arms see identical noise draws.
AblationResult run_ablation(const AssemblyPlan& plan, const Catalog& catalog,
                            const SimParams& sim, const AblationConfig& config);

std::string ablation_to_csv(const AblationResult& result);
std::string ablation_to_json(const AblationResult& result);

// Table-style normalization of a 1-5 rating to [0, 1].
inline double normalize_rating(double mean_rating) { return mean_rating / 5.0; }

struct RecognizabilityConfig {
  int distractors = 4;
  std::uint64_t seed = 0;
};

struct RecognizabilityItem {
  std::string prompt;
  std::string render_path;
  std::vector<std::string> options;  // shuffled, includes the true label
  int answer_index = 0;              // 0-based position of the true label
  int picked_index = -1;
  bool correct = false;
};

struct RecognizabilityResult {
  std::vector<RecognizabilityItem> items;
  double accuracy = 0;
};

struct AssemblyExhibit {
  std::string prompt;       // true label
  std::string render_path;  // image shown to the judge
};

// Forced-choice recognizability: for each exhibit the judge sees one render
// and a seeded-shuffled list of the true label plus `distractors` drawn from
// the pool. Unparseable replies get one re-ask, then ProtocolError.
RecognizabilityResult run_recognizability(
    const std::vector<AssemblyExhibit>& exhibits,
    const std::vector<std::string>& label_pool, LmClient& judge,
    const PromptLibrary& prompts, const RecognizabilityConfig& config);

std::string recognizability_to_json(const RecognizabilityResult& result);

}  // namespace blox

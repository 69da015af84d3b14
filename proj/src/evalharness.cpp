#include "blox/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "json.hpp"

namespace blox {

using nlohmann::json;

// ---------------------------------------------------------------------------
// noise model
// ---------------------------------------------------------------------------

NoiseModel::NoiseModel(double sigma_mm, std::uint64_t seed)
    : sigma_mm_(sigma_mm), rng_(seed) {}

double NoiseModel::next_uniform() {
  // 53-bit mantissa draw; identical across standard libraries
  double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  while (u <= 0.0) u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
  return u;
}

double NoiseModel::next_normal() {
  for (;;) {
    double z;
    if (has_spare_) {
      has_spare_ = false;
      z = spare_;
    } else {
      const double u1 = next_uniform();
      const double u2 = next_uniform();
      const double r = std::sqrt(-2.0 * std::log(u1));
      const double theta = 2.0 * std::numbers::pi * u2;
      z = r * std::cos(theta);
      spare_ = r * std::sin(theta);
      has_spare_ = true;
    }
    if (std::abs(z) <= 3.0) return z;  // truncate tails by resampling
  }
}

Vec2 NoiseModel::next_offset() {
  const double dx = sigma_mm_ * next_normal();
  const double dy = sigma_mm_ * next_normal();
  return {dx, dy};
}

// ---------------------------------------------------------------------------
// noisy constructability trials
// ---------------------------------------------------------------------------

namespace {

// Rebuilds the scene by dropping the surviving placements in order.
Scene build_scene(const std::vector<Placement>& noisy,
                  const std::vector<int>& survivors, const Catalog& catalog,
                  const SimParams& sim) {
  Scene scene;
  for (int i : survivors) {
    const Placement& p = noisy[i];
    scene = drop_settle(scene, p, *find_spec(catalog, p.block_id), sim);
  }
  return scene;
}

std::set<int> mapped_supports(const std::vector<int>& scene_supports,
                              const std::vector<int>& survivors) {
  std::set<int> out;
  for (int s : scene_supports) {
    out.insert(s < 0 ? -1 : survivors[s]);
  }
  return out;
}

}  // namespace

TrialResult simulate_trial(const AssemblyPlan& plan, const Catalog& catalog,
                           const SimParams& sim, double sigma_mm,
                           std::uint64_t seed) {
  const SettleResult reference = settle_plan(plan, catalog, sim);

  NoiseModel noise(sigma_mm, seed);
  const int total = static_cast<int>(plan.placements.size());

  std::vector<Placement> noisy = plan.placements;
  std::vector<bool> fallen(total, false);
  std::vector<int> survivors;

  for (int i = 0; i < total; ++i) {
    const Vec2 offset = noise.next_offset();  // one draw per placement
    noisy[i].xy_mm.x += offset.x;
    noisy[i].xy_mm.y += offset.y;

    std::vector<int> attempt = survivors;
    attempt.push_back(i);
    Scene scene;
    try {
      scene = build_scene(noisy, attempt, catalog, sim);
    } catch (const DropError&) {
      fallen[i] = true;  // noise pushed the block off the workspace
      continue;
    }
    survivors = std::move(attempt);

    // cascade: remove unstable blocks until the structure holds
    for (;;) {
      const StabilityReport report =
          check_scene_stability(scene, catalog, sim);
      if (report.stable) break;
      const int gone = survivors[report.offender.value_or(0)];
      fallen[gone] = true;
      survivors.erase(std::find(survivors.begin(), survivors.end(), gone));
      scene = build_scene(noisy, survivors, catalog, sim);
    }
  }

  TrialResult result;
  result.final_scene = build_scene(noisy, survivors, catalog, sim);
  result.surviving = survivors;
  result.block_correct.assign(total, false);

  for (size_t k = 0; k < survivors.size(); ++k) {
    const int i = survivors[k];
    const PlacedBlock& got = result.final_scene.blocks[k];
    const PlacedBlock& want = reference.scene.blocks[i];
    const double dist = std::hypot(
        std::hypot(got.center_mm.x - want.center_mm.x,
                   got.center_mm.y - want.center_mm.y),
        got.center_mm.z - want.center_mm.z);
    if (dist > sim.pos_threshold_mm) continue;
    const std::set<int> got_supports =
        mapped_supports(result.final_scene.supports[k], survivors);
    const std::set<int> want_supports(reference.scene.supports[i].begin(),
                                      reference.scene.supports[i].end());
    result.block_correct[i] = (got_supports == want_supports);
  }

  result.metrics.total = total;
  result.metrics.placed = static_cast<int>(survivors.size());
  for (int i = 0; i < total; ++i) {
    if (fallen[i]) ++result.metrics.fallen;
    if (result.block_correct[i]) ++result.metrics.correct;
  }
  result.metrics.full_completion = (result.metrics.correct == total);
  return result;
}

// ---------------------------------------------------------------------------
// ablation
// ---------------------------------------------------------------------------

namespace {

ArmSummary run_arm(const std::string& name, const AssemblyPlan& plan,
                   const Catalog& catalog, const SimParams& sim,
                   const AblationConfig& config) {
  ArmSummary arm;
  arm.name = name;
  double frac_sum = 0;
  int completions = 0;
  for (int t = 0; t < config.trials; ++t) {
    const TrialResult trial = simulate_trial(plan, catalog, sim,
                                             config.sigma_mm,
                                             config.base_seed + t);
    frac_sum += trial.metrics.fraction_correct();
    if (trial.metrics.full_completion) ++completions;
    arm.per_trial.push_back(trial.metrics);
  }
  if (config.trials > 0) {
    arm.mean_fraction_correct = frac_sum / config.trials;
    arm.completion_rate = static_cast<double>(completions) / config.trials;
  }
  return arm;
}

}  // namespace

AblationResult run_ablation(const AssemblyPlan& plan, const Catalog& catalog,
                            const SimParams& sim, const AblationConfig& config) {
  AblationResult result;
  const RedesignResult redesigned =
      redesign(plan, catalog, config.redesign_params, sim);
  result.redesigned_plan = redesigned.plan;
  result.redesign_report = redesigned.report;

  result.baseline = run_arm("baseline", plan, catalog, sim, config);
  result.redesigned =
      run_arm("redesigned", redesigned.plan, catalog, sim, config);
  return result;
}

std::string ablation_to_csv(const AblationResult& result) {
  std::ostringstream out;
  out << "arm,trial,total,placed,correct,fallen,fraction_correct,"
         "full_completion\n";
  auto emit = [&](const ArmSummary& arm) {
    for (size_t t = 0; t < arm.per_trial.size(); ++t) {
      const TrialMetrics& m = arm.per_trial[t];
      char frac[32];
      std::snprintf(frac, sizeof(frac), "%.6f", m.fraction_correct());
      out << arm.name << ',' << t << ',' << m.total << ',' << m.placed << ','
          << m.correct << ',' << m.fallen << ',' << frac << ','
          << (m.full_completion ? 1 : 0) << '\n';
    }
  };
  emit(result.baseline);
  emit(result.redesigned);
  return out.str();
}

namespace {

json arm_to_json(const ArmSummary& arm) {
  json trials = json::array();
  for (const TrialMetrics& m : arm.per_trial) {
    trials.push_back({{"total", m.total},
                      {"placed", m.placed},
                      {"correct", m.correct},
                      {"fallen", m.fallen},
                      {"fraction_correct", m.fraction_correct()},
                      {"full_completion", m.full_completion}});
  }
  return {{"name", arm.name},
          {"mean_fraction_correct", arm.mean_fraction_correct},
          {"completion_rate", arm.completion_rate},
          {"trials", trials}};
}

}  // namespace

std::string ablation_to_json(const AblationResult& result) {
  const json doc = {
      {"schema_version", 1},
      {"baseline", arm_to_json(result.baseline)},
      {"redesigned", arm_to_json(result.redesigned)},
      {"redesigned_plan_hash", plan_hash(result.redesigned_plan)},
      {"redesign", json::parse(result.redesign_report.to_json())},
  };
  return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// recognizability
// ---------------------------------------------------------------------------

namespace {

std::vector<long long> integer_tokens(const std::string& text) {
  std::vector<long long> out;
  size_t i = 0;
  while (i < text.size()) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      size_t j = i;
      while (j < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[j]))) {
        ++j;
      }
      if (j - i <= 9) out.push_back(std::stoll(text.substr(i, j - i)));
      i = j;
    } else {
      ++i;
    }
  }
  return out;
}

// Hand-rolled Fisher-Yates; std::shuffle's draw sequence is
// implementation-defined, and option order must be reproducible everywhere.
template <typename T>
void deterministic_shuffle(std::vector<T>& values, std::mt19937_64& rng) {
  for (size_t i = values.size(); i > 1; --i) {
    std::swap(values[i - 1], values[rng() % i]);
  }
}

}  // namespace

RecognizabilityResult run_recognizability(
    const std::vector<AssemblyExhibit>& exhibits,
    const std::vector<std::string>& label_pool, LmClient& judge,
    const PromptLibrary& prompts, const RecognizabilityConfig& config) {
  RecognizabilityResult result;
  int correct = 0;

  for (size_t e = 0; e < exhibits.size(); ++e) {
    const AssemblyExhibit& exhibit = exhibits[e];
    std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ull + e);

    std::vector<std::string> distractors;
    for (const std::string& label : label_pool) {
      if (label != exhibit.prompt) distractors.push_back(label);
    }
    if (static_cast<int>(distractors.size()) < config.distractors) {
      throw ProtocolError("label pool too small for " +
                          std::to_string(config.distractors) + " distractors");
    }
    deterministic_shuffle(distractors, rng);
    distractors.resize(config.distractors);

    RecognizabilityItem item;
    item.prompt = exhibit.prompt;
    item.render_path = exhibit.render_path;
    item.options = distractors;
    item.options.push_back(exhibit.prompt);
    deterministic_shuffle(item.options, rng);
    item.answer_index = static_cast<int>(
        std::find(item.options.begin(), item.options.end(), exhibit.prompt) -
        item.options.begin());

    std::string labels;
    for (size_t i = 0; i < item.options.size(); ++i) {
      labels += std::to_string(i + 1) + ". " + item.options[i] + "\n";
    }
    Conversation conv = {
        {"user", fill_template(prompts.recognize, {{"labels", labels}}), {}},
        {"user", "assembly", exhibit.render_path}};

    const int k = static_cast<int>(item.options.size());
    auto parse_pick = [&](const std::string& reply) -> int {
      const auto tokens = integer_tokens(reply);
      if (tokens.size() == 1 && tokens[0] >= 1 && tokens[0] <= k) {
        return static_cast<int>(tokens[0]) - 1;
      }
      return -1;
    };

    std::string reply = judge.send(conv);
    int pick = parse_pick(reply);
    if (pick < 0) {
      conv.push_back({"assistant", reply, {}});
      conv.push_back({"user",
                      "Reply with only the number (1-" + std::to_string(k) +
                          ") of the matching object.",
                      {}});
      reply = judge.send(conv);
      pick = parse_pick(reply);
      if (pick < 0) {
        throw ProtocolError("unparseable recognizability reply: " + reply);
      }
    }
    item.picked_index = pick;
    item.correct = (pick == item.answer_index);
    if (item.correct) ++correct;
    result.items.push_back(std::move(item));
  }

  result.accuracy = exhibits.empty()
                        ? 0.0
                        : static_cast<double>(correct) / exhibits.size();
  return result;
}

std::string recognizability_to_json(const RecognizabilityResult& result) {
  json items = json::array();
  for (const RecognizabilityItem& item : result.items) {
    items.push_back({{"prompt", item.prompt},
                     {"render", item.render_path},
                     {"options", item.options},
                     {"answer_index", item.answer_index},
                     {"picked_index", item.picked_index},
                     {"correct", item.correct}});
  }
  const json doc = {{"schema_version", 1},
                    {"accuracy", result.accuracy},
                    {"items", items}};
  return doc.dump(2) + "\n";
}

}  // namespace blox

#include "blox/designer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "blox/render.hpp"
#include "json.hpp"

namespace blox {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// prompt templates
// ---------------------------------------------------------------------------

std::string fill_template(
    std::string tmpl,
    const std::vector<std::pair<std::string, std::string>>& substitutions) {
  for (const auto& [key, value] : substitutions) {
    const std::string needle = "{" + key + "}";
    size_t pos = 0;
    while ((pos = tmpl.find(needle, pos)) != std::string::npos) {
      tmpl.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return tmpl;
}

PromptLibrary PromptLibrary::defaults() {
  PromptLibrary p;
  p.elaborate =
      "You are a toy designer working with rigid building blocks on a flat "
      "table. Describe, in a short paragraph, the essential physical "
      "structure of a \"{prompt}\": its major parts, their rough proportions, "
      "and how they rest on each other. Mention only geometry that blocks "
      "can express (no textures, no curves beyond cylinders).";
  p.plan_roles =
      "Object: {prompt}\nDescription: {elaboration}\n\nAvailable blocks "
      "(JSON):\n{catalog_json}\n\nAssign a role to each part of the object "
      "and choose which block type fills each role. Reply with a short "
      "bulleted list: role, block id, count.";
  p.generate =
      "Object: {prompt}\nDescription: {elaboration}\nRoles:\n{roles}\n\n"
      "Available blocks (JSON):\n{catalog_json}\n\nProduce an assembly plan. "
      "Blocks are dropped one at a time in the given order and settle "
      "straight down; earlier blocks support later ones. Coordinates are "
      "millimeters; the workspace spans x and y in [-200, 200]. Valid "
      "orientations: cuboids lwh, lhw, wlh, whl, hlw, hwl; cylinders "
      "upright, lying_x, lying_y.\n\nReply with exactly one fenced JSON "
      "block:\n```json\n{\n  \"placements\": [\n    {\"block_id\": \"...\", "
      "\"orientation\": \"lwh\", \"xy_mm\": [0, 0], \"color\": \"red\"}\n  "
      "],\n  \"order\": [0]\n}\n```\nwhere \"order\" lists placement indices "
      "in drop order.";
  p.repair =
      "The assembly is unstable. Block {offender_index} ('{offender_id}') "
      "tips toward {direction}. The two attached images show the front and "
      "side views with the failing block outlined in red. Adjust the plan "
      "to make every block stable, keeping the object recognizable. Reply "
      "with one fenced JSON block in the same format as before.";
  p.rate =
      "The attached front and side views show a block assembly built for "
      "the prompt \"{prompt}\". Rate how well it depicts the prompt on a "
      "scale of 1 (unrecognizable) to 5 (clearly the object). Reply with "
      "the single digit only.";
  p.rate_retry =
      "Your reply must be a single integer between 1 and 5, with no other "
      "numbers. Rate the assembly again.";
  p.compare =
      "Two block assemblies were built for the prompt \"{prompt}\". The "
      "first two images show assembly 1 (front, side); the next two show "
      "assembly 2. Which one better depicts the prompt? Reply with the "
      "single digit 1 or 2.";
  p.recognize =
      "The attached image shows a block assembly depicting one of the "
      "following objects:\n{labels}\nReply with the single number of the "
      "matching object.";
  p.list_objects =
      "List {n} everyday objects that could plausibly be built from toy "
      "building blocks (cuboids and cylinders). Reply with one object name "
      "per line, no numbering.";
  return p;
}

namespace {

std::optional<std::string> read_if_exists(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

}  // namespace

PromptLibrary PromptLibrary::load(const std::string& dir) {
  PromptLibrary p = defaults();
  const std::vector<std::pair<std::string, std::string*>> files = {
      {"elaborate.txt", &p.elaborate},
      {"plan_roles.txt", &p.plan_roles},
      {"generate.txt", &p.generate},
      {"repair.txt", &p.repair},
      {"rate.txt", &p.rate},
      {"rate_retry.txt", &p.rate_retry},
      {"compare.txt", &p.compare},
      {"recognize.txt", &p.recognize},
      {"list_objects.txt", &p.list_objects},
  };
  for (const auto& [name, slot] : files) {
    if (auto text = read_if_exists(fs::path(dir) / name)) *slot = *text;
  }
  return p;
}

// ---------------------------------------------------------------------------
// client sets
// ---------------------------------------------------------------------------

namespace {

class ReplayClientSet final : public ClientSet {
 public:
  explicit ReplayClientSet(const std::string& dir) {
    std::vector<fs::path> chain_files;
    if (!fs::is_directory(dir)) {
      throw ParseError("replay directory not found: " + dir);
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name.rfind("chain_", 0) == 0 && entry.path().extension() == ".json") {
        chain_files.push_back(entry.path());
      }
    }
    std::sort(chain_files.begin(), chain_files.end());
    for (const auto& path : chain_files) {
      chains_.push_back(
          std::make_unique<ReplayClient>(Transcript::load(path.string())));
    }
    const fs::path selector_path = fs::path(dir) / "selector.json";
    if (!fs::exists(selector_path)) {
      throw ParseError("replay directory missing selector.json: " + dir);
    }
    selector_ =
        std::make_unique<ReplayClient>(Transcript::load(selector_path.string()));
  }

  LmClient& chain(int idx) override {
    if (idx < 0 || idx >= static_cast<int>(chains_.size())) {
      throw LmError("no replay transcript for chain " + std::to_string(idx));
    }
    return *chains_[idx];
  }

  LmClient& selector() override { return *selector_; }

  int chain_limit() const override { return static_cast<int>(chains_.size()); }

  std::string chain_transcript_id(int idx) const override {
    if (idx < 0 || idx >= static_cast<int>(chains_.size())) return "";
    return chains_[idx]->transcript().id;
  }

 private:
  std::vector<std::unique_ptr<ReplayClient>> chains_;
  std::unique_ptr<ReplayClient> selector_;
};

class LiveClientSet final : public ClientSet {
 public:
  explicit LiveClientSet(const LiveClientConfig& config)
      : live_(config), model_(config.model) {}

  LmClient& chain(int idx) override {
    while (static_cast<int>(chains_.size()) <= idx) {
      char id[32];
      std::snprintf(id, sizeof(id), "chain_%02d",
                    static_cast<int>(chains_.size()));
      chains_.push_back(std::make_unique<RecordingClient>(live_, id, model_));
    }
    return *chains_[idx];
  }

  LmClient& selector() override {
    if (!selector_) {
      selector_ = std::make_unique<RecordingClient>(live_, "selector", model_);
    }
    return *selector_;
  }

  int chain_limit() const override { return 1 << 20; }

  std::string chain_transcript_id(int idx) const override {
    if (idx < 0 || idx >= static_cast<int>(chains_.size())) return "";
    return chains_[idx]->transcript().id;
  }

  void save_transcripts(const std::string& dir) override {
    fs::create_directories(dir);
    auto save_one = [&](const Transcript& t) {
      t.save((fs::path(dir) / (t.id + ".json")).string());
      // content-addressed copy for cross-run dedup / integrity checks
      t.save((fs::path(dir) / (t.content_hash() + ".json")).string());
    };
    for (const auto& c : chains_) save_one(c->transcript());
    if (selector_) save_one(selector_->transcript());
  }

 private:
  LiveClient live_;
  std::string model_;
  std::vector<std::unique_ptr<RecordingClient>> chains_;
  std::unique_ptr<RecordingClient> selector_;
};

}  // namespace

std::unique_ptr<ClientSet> make_replay_client_set(const std::string& dir) {
  return std::make_unique<ReplayClientSet>(dir);
}

std::unique_ptr<ClientSet> make_live_client_set(const LiveClientConfig& config) {
  return std::make_unique<LiveClientSet>(config);
}

// ---------------------------------------------------------------------------
// Phase I operations
// ---------------------------------------------------------------------------

std::string elaborate(const std::string& prompt, LmClient& client,
                      const PromptLibrary& prompts) {
  if (prompt.empty()) throw std::invalid_argument("empty design prompt");
  const Conversation conv = {
      {"user", fill_template(prompts.elaborate, {{"prompt", prompt}}), {}}};
  return client.send(conv);
}

std::string plan_blocks(const std::string& prompt, const std::string& elaboration,
                        const Catalog& catalog, LmClient& client,
                        const PromptLibrary& prompts) {
  const Conversation conv = {
      {"user",
       fill_template(prompts.plan_roles, {{"prompt", prompt},
                                          {"elaboration", elaboration},
                                          {"catalog_json",
                                           catalog_to_json(catalog)}}),
       {}}};
  return client.send(conv);
}

std::string extract_fenced_json(const std::string& text) {
  size_t open = text.find("```");
  if (open != std::string::npos) {
    size_t start = open + 3;
    // skip an optional language tag up to end of line
    const size_t eol = text.find('\n', start);
    if (eol != std::string::npos) {
      const std::string tag = text.substr(start, eol - start);
      if (tag.find('{') == std::string::npos) start = eol + 1;
    }
    const size_t close = text.find("```", start);
    if (close != std::string::npos) {
      return text.substr(start, close - start);
    }
  }
  // tolerate replies that drop the fences but still contain one JSON object
  const size_t brace = text.find('{');
  const size_t last = text.rfind('}');
  if (brace != std::string::npos && last != std::string::npos && last > brace) {
    return text.substr(brace, last - brace + 1);
  }
  throw ParseError("no fenced JSON block in model reply");
}

AssemblyPlan parse_model_plan(const std::string& reply, const std::string& prompt,
                              const Catalog& catalog,
                              const Workspace& workspace) {
  const json doc = json::parse(extract_fenced_json(reply), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw ParseError("model plan is not a JSON object");
  }
  if (!doc.contains("placements") || !doc["placements"].is_array()) {
    throw ParseError("model plan missing 'placements' array");
  }
  std::vector<Placement> placements;
  try {
    for (const auto& entry : doc["placements"]) {
      Placement p;
      p.block_id = entry.contains("block_id")
                       ? entry["block_id"].get<std::string>()
                       : entry.at("block").get<std::string>();
      const std::string oname = entry.value("orientation", std::string("lwh"));
      const auto o = orientation_from_name(oname);
      if (!o) throw ParseError("unknown orientation: " + oname);
      p.orientation = *o;
      if (entry.contains("xy_mm")) {
        const auto& xy = entry["xy_mm"];
        if (!xy.is_array() || xy.size() != 2) {
          throw ParseError("xy_mm must be a pair");
        }
        p.xy_mm = {xy[0].get<double>(), xy[1].get<double>()};
      } else {
        p.xy_mm = {entry.at("x").get<double>(), entry.at("y").get<double>()};
      }
      p.color = entry.value("color", std::string());
      placements.push_back(std::move(p));
    }
    if (doc.contains("order")) {
      if (!doc["order"].is_array() ||
          doc["order"].size() != placements.size()) {
        throw ParseError("'order' must index every placement exactly once");
      }
      std::vector<Placement> ordered;
      std::vector<bool> used(placements.size(), false);
      for (const auto& idx_json : doc["order"]) {
        const int idx = idx_json.get<int>();
        if (idx < 0 || idx >= static_cast<int>(placements.size()) ||
            used[idx]) {
          throw ParseError("'order' must index every placement exactly once");
        }
        used[idx] = true;
        ordered.push_back(placements[idx]);
      }
      placements = std::move(ordered);
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("model plan: ") + e.what());
  }

  AssemblyPlan plan;
  plan.prompt = prompt;
  plan.catalog_hash = catalog_hash(catalog);
  plan.placements = std::move(placements);

  const ValidationReport report = validate_plan(plan, catalog, workspace);
  if (!report.ok()) {
    std::string detail;
    for (const auto& v : report.violations) {
      if (!detail.empty()) detail += "; ";
      detail += v.code + " (" + v.detail + ")";
    }
    throw ValidationError(detail);
  }
  return plan;
}

AssemblyPlan generate_plan(const std::string& prompt,
                           const std::string& elaboration,
                           const std::string& roles, const Catalog& catalog,
                           LmClient& client, const PromptLibrary& prompts,
                           const Workspace& workspace) {
  Conversation conv = {
      {"user",
       fill_template(prompts.generate, {{"prompt", prompt},
                                        {"elaboration", elaboration},
                                        {"roles", roles},
                                        {"catalog_json",
                                         catalog_to_json(catalog)}}),
       {}}};
  std::string reply = client.send(conv);
  try {
    return parse_model_plan(reply, prompt, catalog, workspace);
  } catch (const std::exception& e) {
    conv.push_back({"assistant", reply, {}});
    conv.push_back({"user",
                    std::string("That plan was rejected: ") + e.what() +
                        ". Reply again with one corrected fenced JSON block "
                        "in the same format.",
                    {}});
    reply = client.send(conv);
    return parse_model_plan(reply, prompt, catalog, workspace);
  }
}

namespace {

std::string dominant_direction(const Vec2& d) {
  if (std::abs(d.x) >= std::abs(d.y)) return d.x >= 0 ? "+x" : "-x";
  return d.y >= 0 ? "+y" : "-y";
}

// Renders front and side views into dir with the given stem, returning the
// two file paths.
std::pair<std::string, std::string> render_views(const Scene& scene,
                                                 const std::set<int>& highlights,
                                                 const std::string& dir,
                                                 const std::string& stem) {
  fs::create_directories(dir);
  const std::string front = (fs::path(dir) / (stem + "_front.ppm")).string();
  const std::string side = (fs::path(dir) / (stem + "_side.ppm")).string();
  write_ppm(render_ortho(scene, ViewAxis::Front, highlights).image, front);
  write_ppm(render_ortho(scene, ViewAxis::Side, highlights).image, side);
  return {front, side};
}

}  // namespace

DesignCandidate repair_loop(DesignCandidate candidate, const Catalog& catalog,
                            const SimParams& sim, LmClient& client,
                            const PromptLibrary& prompts,
                            const std::string& render_dir, int max_rounds) {
  for (int round = 0; round < max_rounds && !candidate.report.stable; ++round) {
    const int offender = candidate.report.offender.value_or(0);
    const auto [front, side] = render_views(
        candidate.scene, {offender}, render_dir,
        "repair_round_" + std::to_string(round));
    const std::string offender_id =
        offender < static_cast<int>(candidate.plan.placements.size())
            ? candidate.plan.placements[offender].block_id
            : "?";
    Conversation conv = {
        {"user",
         fill_template(prompts.repair,
                       {{"offender_index", std::to_string(offender)},
                        {"offender_id", offender_id},
                        {"direction",
                         dominant_direction(candidate.report.tip_direction)}}),
         {}},
        {"user", "front view", front},
        {"user", "side view", side}};
    const std::string reply = client.send(conv);
    AssemblyPlan repaired;
    try {
      repaired = parse_model_plan(reply, candidate.plan.prompt, catalog,
                                  sim.workspace);
    } catch (const std::exception&) {
      break;  // keep the best plan we have
    }
    SettleResult settled;
    try {
      settled = settle_plan(repaired, catalog, sim);
    } catch (const DropError&) {
      break;
    }
    candidate.plan = std::move(repaired);
    candidate.scene = std::move(settled.scene);
    candidate.report = check_scene_stability(candidate.scene, catalog, sim);
    candidate.repair_rounds = round + 1;
  }
  return candidate;
}

std::vector<DesignCandidate> generate_candidates(
    const std::string& prompt, const Catalog& catalog, const SimParams& sim,
    ClientSet& clients, int n, const PromptLibrary& prompts,
    const std::string& render_dir, std::vector<ChainFailure>* failures) {
  std::vector<DesignCandidate> candidates;
  const int limit = std::min(n, clients.chain_limit());
  for (int i = 0; i < limit; ++i) {
    try {
      LmClient& client = clients.chain(i);
      const std::string elaboration = elaborate(prompt, client, prompts);
      const std::string roles =
          plan_blocks(prompt, elaboration, catalog, client, prompts);
      DesignCandidate c;
      c.plan = generate_plan(prompt, elaboration, roles, catalog, client,
                             prompts, sim.workspace);
      SettleResult settled = settle_plan(c.plan, catalog, sim);
      c.scene = std::move(settled.scene);
      c.report = check_scene_stability(c.scene, catalog, sim);
      const std::string chain_dir =
          (fs::path(render_dir) / ("chain_" + std::to_string(i))).string();
      c = repair_loop(std::move(c), catalog, sim, client, prompts, chain_dir);
      const auto [front, side] =
          render_views(c.scene, {}, chain_dir, "candidate");
      c.front_render_path = front;
      c.side_render_path = side;
      c.transcript_id = clients.chain_transcript_id(i);
      candidates.push_back(std::move(c));
    } catch (const std::exception& e) {
      if (failures) failures->push_back({i, e.what()});
    }
  }
  if (candidates.empty()) {
    throw NoCandidatesError("all " + std::to_string(limit) +
                            " candidate chains failed");
  }
  return candidates;
}

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

}  // namespace

int rate_candidate(DesignCandidate& candidate, LmClient& client,
                   const PromptLibrary& prompts) {
  Conversation conv = {
      {"user",
       fill_template(prompts.rate, {{"prompt", candidate.plan.prompt}}),
       {}},
      {"user", "front view", candidate.front_render_path},
      {"user", "side view", candidate.side_render_path}};
  std::string reply = client.send(conv);
  auto tokens = integer_tokens(reply);
  // accept only an unambiguous reply: exactly one integer, in range
  if (tokens.size() == 1 && tokens[0] >= 1 && tokens[0] <= 5) {
    candidate.rating = static_cast<int>(tokens[0]);
    candidate.rating_clamped = false;
    return *candidate.rating;
  }
  conv.push_back({"assistant", reply, {}});
  conv.push_back({"user", prompts.rate_retry, {}});
  reply = client.send(conv);
  tokens = integer_tokens(reply);
  if (tokens.empty()) {
    throw LmError("unparseable rating reply: " + reply);
  }
  const long long raw = tokens.front();
  const int clamped = static_cast<int>(std::clamp<long long>(raw, 1, 5));
  candidate.rating = clamped;
  candidate.rating_clamped = (tokens.size() != 1 || raw != clamped);
  return clamped;
}

DesignCandidate select_best(std::vector<DesignCandidate> candidates,
                            LmClient& client, const PromptLibrary& prompts) {
  if (candidates.empty()) throw NoCandidatesError("no candidates to select");

  std::vector<size_t> pool;
  for (size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].report.stable) pool.push_back(i);
  }
  if (pool.empty()) {
    for (size_t i = 0; i < candidates.size(); ++i) pool.push_back(i);
  }

  auto rating_of = [&](size_t i) { return candidates[i].rating.value_or(1); };
  int max_rating = 1;
  for (size_t i : pool) max_rating = std::max(max_rating, rating_of(i));
  std::erase_if(pool, [&](size_t i) { return rating_of(i) < max_rating - 1; });

  // seeding: rating descending, plan hash ascending as the tie break
  std::sort(pool.begin(), pool.end(), [&](size_t a, size_t b) {
    if (rating_of(a) != rating_of(b)) return rating_of(a) > rating_of(b);
    return plan_hash(candidates[a].plan) < plan_hash(candidates[b].plan);
  });

  const std::string prompt = candidates[pool.front()].plan.prompt;
  while (pool.size() > 1) {
    std::vector<size_t> next;
    size_t start = 0;
    if (pool.size() % 2 == 1) {
      next.push_back(pool[0]);  // bye for the top seed
      start = 1;
    }
    for (size_t i = start; i + 1 < pool.size(); i += 2) {
      const DesignCandidate& a = candidates[pool[i]];
      const DesignCandidate& b = candidates[pool[i + 1]];
      const Conversation conv = {
          {"user", fill_template(prompts.compare, {{"prompt", prompt}}), {}},
          {"user", "assembly 1 front", a.front_render_path},
          {"user", "assembly 1 side", a.side_render_path},
          {"user", "assembly 2 front", b.front_render_path},
          {"user", "assembly 2 side", b.side_render_path}};
      const std::string reply = client.send(conv);
      const size_t pick = reply.find_first_of("12");
      if (pick == std::string::npos) {
        throw LmError("unparseable comparison reply: " + reply);
      }
      next.push_back(reply[pick] == '1' ? pool[i] : pool[i + 1]);
    }
    // preserve seed order between rounds
    std::sort(next.begin(), next.end(), [&](size_t a, size_t b) {
      if (rating_of(a) != rating_of(b)) return rating_of(a) > rating_of(b);
      return plan_hash(candidates[a].plan) < plan_hash(candidates[b].plan);
    });
    pool = std::move(next);
  }
  return candidates[pool.front()];
}

std::vector<std::string> list_objects(int n, LmClient& client,
                                      const PromptLibrary& prompts) {
  const Conversation conv = {
      {"user",
       fill_template(prompts.list_objects, {{"n", std::to_string(n)}}),
       {}}};
  const std::string reply = client.send(conv);
  std::vector<std::string> out;
  std::istringstream lines(reply);
  std::string line;
  while (std::getline(lines, line) && static_cast<int>(out.size()) < n) {
    // strip list decoration and surrounding whitespace
    size_t b = line.find_first_not_of(" \t-*0123456789.)");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  if (out.empty()) throw LmError("object list reply had no entries");
  return out;
}

DesignRunResult run_design_pipeline(const DesignRunConfig& config,
                                    const Catalog& catalog, ClientSet& clients) {
  fs::create_directories(config.out_dir);
  const std::string candidates_dir =
      (fs::path(config.out_dir) / "candidates").string();

  DesignRunResult result;
  std::vector<DesignCandidate> candidates =
      generate_candidates(config.prompt, catalog, config.sim, clients,
                          config.candidates, config.prompts, candidates_dir,
                          &result.failures);
  result.generated = static_cast<int>(candidates.size());

  for (DesignCandidate& c : candidates) {
    rate_candidate(c, clients.selector(), config.prompts);
  }
  result.winner = select_best(candidates, clients.selector(), config.prompts);

  save_plan(result.winner.plan,
            (fs::path(config.out_dir) / "winner.plan.json").string());
  const auto [front, side] = render_views(result.winner.scene, {},
                                          config.out_dir, "winner");
  export_mesh(result.winner.scene,
              (fs::path(config.out_dir) / "winner.obj").string());
  clients.save_transcripts(
      (fs::path(config.out_dir) / "transcripts").string());

  json manifest = {
      {"schema_version", 1},
      {"prompt", config.prompt},
      {"catalog_hash", catalog_hash(catalog)},
      {"requested_candidates", config.candidates},
      {"generated_candidates", result.generated},
      {"winner", {{"plan_hash", plan_hash(result.winner.plan)},
                  {"rating", result.winner.rating.value_or(0)},
                  {"stable", result.winner.report.stable},
                  {"transcript", result.winner.transcript_id}}},
  };
  json candidate_list = json::array();
  for (const DesignCandidate& c : candidates) {
    candidate_list.push_back({{"plan_hash", plan_hash(c.plan)},
                              {"rating", c.rating.value_or(0)},
                              {"stable", c.report.stable},
                              {"repair_rounds", c.repair_rounds},
                              {"transcript", c.transcript_id}});
  }
  manifest["candidates"] = std::move(candidate_list);
  json failure_list = json::array();
  for (const ChainFailure& f : result.failures) {
    failure_list.push_back({{"chain", f.chain}, {"reason", f.reason}});
  }
  manifest["failures"] = std::move(failure_list);
  std::ofstream out(fs::path(config.out_dir) / "manifest.json",
                    std::ios::binary);
  out << manifest.dump(2) << "\n";

  return result;
}

}  // namespace blox

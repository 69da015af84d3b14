#include <filesystem>

#include "blox/designer.hpp"
#include "doctest.h"

using namespace blox;
namespace fs = std::filesystem;

namespace {

Catalog small_catalog() {
  return {{"cube40", Shape::Cuboid, {40, 40, 40}, 10},
          {"plank120", Shape::Cuboid, {120, 40, 20}, 4}};
}

ReplayClient scripted(std::vector<std::string> replies) {
  Transcript t;
  t.id = "scripted";
  t.model = "replay";
  for (auto& r : replies) t.turns.push_back({{}, std::move(r), ""});
  return ReplayClient(std::move(t));
}

DesignCandidate stable_candidate(const std::string& prompt, double x,
                                 std::optional<int> rating) {
  DesignCandidate c;
  c.plan.prompt = prompt;
  c.plan.placements = {{"cube40", Orientation::LWH, {x, 0}, "red"}};
  c.report.stable = true;
  c.rating = rating;
  return c;
}

std::string data_path(const std::string& rel) {
  return std::string(BLOX_DATA_DIR) + "/" + rel;
}

}  // namespace

TEST_CASE("fill_template replaces every occurrence of each key") {
  const std::string out = fill_template(
      "{a} and {b} and {a}", {{"a", "x"}, {"b", "{a}"}});
  // substitution is sequential; values are not re-scanned for earlier keys
  CHECK(out == "x and {a} and x");
  CHECK(fill_template("plain", {{"a", "x"}}) == "plain");
}

TEST_CASE("extract_fenced_json handles fences, bare JSON, and garbage") {
  CHECK(extract_fenced_json("before\n```json\n{\"k\": 1}\n```\nafter") ==
        "{\"k\": 1}\n");
  CHECK(extract_fenced_json("```\n{\"k\": 2}\n```") == "{\"k\": 2}\n");
  // no fences: first '{' to last '}'
  CHECK(extract_fenced_json("sure: {\"k\": 3} there") == "{\"k\": 3}");
  CHECK_THROWS_AS(extract_fenced_json("no json here"), ParseError);
}

TEST_CASE("parse_model_plan accepts both field spellings") {
  const Catalog catalog = small_catalog();
  const auto a = parse_model_plan(
      R"(```json
{"placements": [{"block_id": "cube40", "orientation": "lwh", "xy_mm": [5, -5], "color": "red"}]}
```)",
      "tower", catalog);
  REQUIRE(a.placements.size() == 1);
  CHECK(a.placements[0].block_id == "cube40");
  CHECK(a.placements[0].xy_mm.x == 5);
  CHECK(a.prompt == "tower");
  CHECK(a.catalog_hash == catalog_hash(catalog));

  const auto b = parse_model_plan(
      R"({"placements": [{"block": "cube40", "x": 1, "y": 2}]})", "t", catalog);
  CHECK(b.placements[0].xy_mm.y == 2);
  CHECK(b.placements[0].orientation == Orientation::LWH);  // default
}

TEST_CASE("parse_model_plan applies the order array as a permutation") {
  const Catalog catalog = small_catalog();
  const auto plan = parse_model_plan(
      R"({"placements": [
            {"block_id": "cube40", "xy_mm": [1, 0]},
            {"block_id": "plank120", "xy_mm": [2, 0]}],
          "order": [1, 0]})",
      "t", catalog);
  REQUIRE(plan.placements.size() == 2);
  CHECK(plan.placements[0].block_id == "plank120");
  CHECK(plan.placements[1].block_id == "cube40");
}

TEST_CASE("parse_model_plan rejects malformed and invalid plans") {
  const Catalog catalog = small_catalog();
  CHECK_THROWS_AS(parse_model_plan(R"({"placements": [
      {"block_id": "cube40", "xy_mm": [0, 0]}], "order": [0, 0]})",
                                   "t", catalog),
                  ParseError);
  CHECK_THROWS_AS(parse_model_plan(R"({"placements": [
      {"block_id": "mystery", "xy_mm": [0, 0]}]})",
                                   "t", catalog),
                  ValidationError);
  CHECK_THROWS_AS(parse_model_plan(R"({"placements": [
      {"block_id": "cube40", "orientation": "upright", "xy_mm": [0, 0]}]})",
                                   "t", catalog),
                  ValidationError);  // cuboids have no upright orientation
}

TEST_CASE("generate_plan retries once after a rejected reply") {
  const Catalog catalog = small_catalog();
  ReplayClient client = scripted(
      {"no json at all",
       R"(```json
{"placements": [{"block_id": "cube40", "xy_mm": [0, 0], "color": "red"}]}
```)"});
  const auto plan =
      generate_plan("tower", "elab", "roles", catalog, client,
                    PromptLibrary::defaults());
  CHECK(plan.placements.size() == 1);
  CHECK(client.cursor() == 2);
}

TEST_CASE("rate_candidate accepts a clean single digit") {
  auto c = stable_candidate("t", 0, std::nullopt);
  ReplayClient client = scripted({"4"});
  CHECK(rate_candidate(c, client, PromptLibrary::defaults()) == 4);
  CHECK(c.rating == 4);
  CHECK_FALSE(c.rating_clamped);
  CHECK(client.cursor() == 1);
}

TEST_CASE("rate_candidate accepts a rating embedded in prose") {
  auto c = stable_candidate("t", 0, std::nullopt);
  ReplayClient client = scripted({"I rate it 3."});
  CHECK(rate_candidate(c, client, PromptLibrary::defaults()) == 3);
  CHECK_FALSE(c.rating_clamped);
}

TEST_CASE("rate_candidate re-asks on ambiguity, then clamps") {
  auto c = stable_candidate("t", 0, std::nullopt);
  ReplayClient client = scripted({"7/5", "7"});
  CHECK(rate_candidate(c, client, PromptLibrary::defaults()) == 5);
  CHECK(c.rating_clamped);
  CHECK(client.cursor() == 2);
}

TEST_CASE("rate_candidate throws after two numberless replies") {
  auto c = stable_candidate("t", 0, std::nullopt);
  ReplayClient client = scripted({"lovely", "still no number"});
  CHECK_THROWS_AS(rate_candidate(c, client, PromptLibrary::defaults()),
                  LmError);
}

TEST_CASE("select_best runs a seeded knockout over the rating cutoff") {
  std::vector<DesignCandidate> candidates = {
      stable_candidate("t", 0, 5), stable_candidate("t", 10, 5),
      stable_candidate("t", 20, 4), stable_candidate("t", 30, 3)};
  // rating 3 misses the (max - 1) cutoff; pool of 3 gives the top seed a bye
  ReplayClient client = scripted({"1", "1"});
  const auto winner =
      select_best(candidates, client, PromptLibrary::defaults());
  CHECK(winner.rating == 5);
  CHECK(client.cursor() == 2);  // one semifinal, one final
}

TEST_CASE("select_best with a single candidate asks nothing") {
  ReplayClient client = scripted({});
  const auto winner = select_best({stable_candidate("t", 0, 2)}, client,
                                  PromptLibrary::defaults());
  CHECK(winner.rating == 2);
  CHECK(client.cursor() == 0);
}

TEST_CASE("select_best prefers stable candidates regardless of rating") {
  auto shaky = stable_candidate("t", 0, 5);
  shaky.report.stable = false;
  ReplayClient client = scripted({});
  const auto winner = select_best({shaky, stable_candidate("t", 10, 2)},
                                  client, PromptLibrary::defaults());
  CHECK(winner.report.stable);
  CHECK(winner.rating == 2);
}

TEST_CASE("list_objects strips list decoration") {
  ReplayClient client = scripted({"1. chair\n2) table\n- lamp\nboat\n"});
  const auto objects = list_objects(4, client, PromptLibrary::defaults());
  REQUIRE(objects.size() == 4);
  CHECK(objects[0] == "chair");
  CHECK(objects[1] == "table");
  CHECK(objects[2] == "lamp");
  CHECK(objects[3] == "boat");
}

TEST_CASE("elaborate rejects an empty prompt") {
  ReplayClient client = scripted({});
  CHECK_THROWS(elaborate("", client, PromptLibrary::defaults()));
}

TEST_CASE("replayed design runs are deterministic end to end") {
  const Catalog catalog = load_catalog(data_path("catalog.json"));
  const fs::path base = fs::temp_directory_path() / "blox_designer_test";
  fs::remove_all(base);

  std::string first_hash;
  for (int run = 0; run < 2; ++run) {
    auto clients = make_replay_client_set(data_path("transcripts/table"));
    DesignRunConfig config;
    config.prompt = "table";
    config.candidates = 3;
    config.out_dir = (base / ("run" + std::to_string(run))).string();
    const DesignRunResult result =
        run_design_pipeline(config, catalog, *clients);
    CHECK(result.generated == 3);
    CHECK(result.failures.empty());
    CHECK(result.winner.report.stable);
    const std::string hash = plan_hash(result.winner.plan);
    if (run == 0) {
      first_hash = hash;
    } else {
      CHECK(hash == first_hash);
    }
    CHECK(fs::exists(fs::path(config.out_dir) / "winner.plan.json"));
    CHECK(fs::exists(fs::path(config.out_dir) / "winner_front.ppm"));
    CHECK(fs::exists(fs::path(config.out_dir) / "manifest.json"));
  }
  fs::remove_all(base);
}

#include "blox/catalog.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace blox {

using nlohmann::json;

double BlockSpec::volume_mm3() const {
  if (shape == Shape::Cuboid) {
    return dims_mm[0] * dims_mm[1] * dims_mm[2];
  }
  const double r = dims_mm[0] / 2.0;
  return std::numbers::pi * r * r * dims_mm[1];
}

bool orientation_valid_for(Shape shape, Orientation o) {
  const bool cuboid_perm = o == Orientation::LWH || o == Orientation::LHW ||
                           o == Orientation::WLH || o == Orientation::WHL ||
                           o == Orientation::HLW || o == Orientation::HWL;
  return shape == Shape::Cuboid ? cuboid_perm : !cuboid_perm;
}

std::string orientation_name(Orientation o) {
  switch (o) {
    case Orientation::LWH: return "lwh";
    case Orientation::LHW: return "lhw";
    case Orientation::WLH: return "wlh";
    case Orientation::WHL: return "whl";
    case Orientation::HLW: return "hlw";
    case Orientation::HWL: return "hwl";
    case Orientation::Upright: return "upright";
    case Orientation::LyingX: return "lying_x";
    case Orientation::LyingY: return "lying_y";
  }
  return "lwh";
}

std::optional<Orientation> orientation_from_name(const std::string& name) {
  static const std::map<std::string, Orientation> table = {
      {"lwh", Orientation::LWH},     {"lhw", Orientation::LHW},
      {"wlh", Orientation::WLH},     {"whl", Orientation::WHL},
      {"hlw", Orientation::HLW},     {"hwl", Orientation::HWL},
      {"upright", Orientation::Upright},
      {"lying_x", Orientation::LyingX},
      {"lying_y", Orientation::LyingY},
  };
  auto it = table.find(name);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

Vec3 effective_dims(const BlockSpec& spec, Orientation o) {
  if (!orientation_valid_for(spec.shape, o)) {
    throw ValidationError("invalid orientation '" + orientation_name(o) +
                          "' for block '" + spec.id + "'");
  }
  if (spec.shape == Shape::Cuboid) {
    const double l = spec.dims_mm[0], w = spec.dims_mm[1], h = spec.dims_mm[2];
    switch (o) {
      case Orientation::LWH: return {l, w, h};
      case Orientation::LHW: return {l, h, w};
      case Orientation::WLH: return {w, l, h};
      case Orientation::WHL: return {w, h, l};
      case Orientation::HLW: return {h, l, w};
      case Orientation::HWL: return {h, w, l};
      default: break;
    }
  }
  const double d = spec.dims_mm[0], h = spec.dims_mm[1];
  switch (o) {
    case Orientation::Upright: return {d, d, h};
    case Orientation::LyingX: return {h, d, d};
    case Orientation::LyingY: return {d, h, d};
    default: break;
  }
  throw ValidationError("unreachable orientation");
}

const BlockSpec* find_spec(const Catalog& catalog, const std::string& id) {
  for (const auto& spec : catalog) {
    if (spec.id == id) return &spec;
  }
  return nullptr;
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

json parse_json(const std::string& text, const char* what) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError(std::string("malformed ") + what);
  return doc;
}

void check_spec(const BlockSpec& spec) {
  const size_t want = spec.shape == Shape::Cuboid ? 3 : 2;
  if (spec.dims_mm.size() != want) {
    throw ValidationError("block '" + spec.id + "': expected " +
                          std::to_string(want) + " dimensions");
  }
  for (double d : spec.dims_mm) {
    if (!(d > 0)) {
      throw ValidationError("block '" + spec.id + "': non-positive dimension");
    }
  }
  if (spec.count < 0) {
    throw ValidationError("block '" + spec.id + "': negative count");
  }
  if (spec.id.empty()) throw ValidationError("block with empty id");
}

}  // namespace

Catalog parse_catalog(const std::string& json_text) {
  json doc = parse_json(json_text, "catalog document");
  if (!doc.is_object() || !doc.contains("blocks") || !doc["blocks"].is_array()) {
    throw ParseError("catalog document must be an object with a blocks array");
  }
  Catalog catalog;
  for (const auto& entry : doc["blocks"]) {
    if (!entry.is_object()) throw ParseError("catalog entry must be an object");
    BlockSpec spec;
    try {
      spec.id = entry.at("id").get<std::string>();
      const std::string shape = entry.at("shape").get<std::string>();
      if (shape == "cuboid") {
        spec.shape = Shape::Cuboid;
      } else if (shape == "cylinder") {
        spec.shape = Shape::Cylinder;
      } else {
        throw ParseError("unknown shape: " + shape);
      }
      spec.dims_mm = entry.at("dims_mm").get<std::vector<double>>();
      spec.count = entry.at("count").get<int>();
    } catch (const json::exception& e) {
      throw ParseError(std::string("catalog entry: ") + e.what());
    }
    check_spec(spec);
    if (find_spec(catalog, spec.id) != nullptr) {
      throw ValidationError("duplicate block id '" + spec.id + "'");
    }
    catalog.push_back(std::move(spec));
  }
  return catalog;
}

Catalog load_catalog(const std::string& path) {
  return parse_catalog(read_file(path));
}

std::string catalog_to_json(const Catalog& catalog) {
  json blocks = json::array();
  for (const auto& spec : catalog) {
    blocks.push_back({
        {"id", spec.id},
        {"shape", spec.shape == Shape::Cuboid ? "cuboid" : "cylinder"},
        {"dims_mm", spec.dims_mm},
        {"count", spec.count},
    });
  }
  json doc = {{"schema_version", 1}, {"blocks", blocks}};
  return doc.dump(2) + "\n";
}

void save_catalog(const Catalog& catalog, const std::string& path) {
  write_file(path, catalog_to_json(catalog));
}

std::string catalog_hash(const Catalog& catalog) {
  return fnv1a64_hex(catalog_to_json(catalog));
}

AssemblyPlan parse_plan(const std::string& json_text) {
  json doc = parse_json(json_text, "plan document");
  if (!doc.is_object()) throw ParseError("plan document must be an object");
  AssemblyPlan plan;
  try {
    plan.prompt = doc.value("prompt", std::string());
    plan.catalog_hash = doc.value("catalog_hash", std::string());
    for (const auto& entry : doc.at("placements")) {
      Placement p;
      p.block_id = entry.at("block_id").get<std::string>();
      const std::string oname = entry.at("orientation").get<std::string>();
      auto o = orientation_from_name(oname);
      if (!o) throw ParseError("unknown orientation: " + oname);
      p.orientation = *o;
      const auto xy = entry.at("xy_mm");
      if (!xy.is_array() || xy.size() != 2) {
        throw ParseError("xy_mm must be a pair");
      }
      p.xy_mm = {xy[0].get<double>(), xy[1].get<double>()};
      p.color = entry.value("color", std::string());
      plan.placements.push_back(std::move(p));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan document: ") + e.what());
  }
  return plan;
}

AssemblyPlan load_plan(const std::string& path) {
  return parse_plan(read_file(path));
}

std::string plan_to_json(const AssemblyPlan& plan) {
  json placements = json::array();
  for (const auto& p : plan.placements) {
    placements.push_back({
        {"block_id", p.block_id},
        {"orientation", orientation_name(p.orientation)},
        {"xy_mm", {p.xy_mm.x, p.xy_mm.y}},
        {"color", p.color},
    });
  }
  json doc = {{"schema_version", 1},
              {"prompt", plan.prompt},
              {"catalog_hash", plan.catalog_hash},
              {"placements", placements}};
  return doc.dump(2) + "\n";
}

void save_plan(const AssemblyPlan& plan, const std::string& path) {
  write_file(path, plan_to_json(plan));
}

std::string plan_hash(const AssemblyPlan& plan) {
  return fnv1a64_hex(plan_to_json(plan));
}

ValidationReport validate_plan(const AssemblyPlan& plan, const Catalog& catalog,
                               const Workspace& workspace) {
  ValidationReport report;
  std::map<std::string, int> usage;
  for (size_t i = 0; i < plan.placements.size(); ++i) {
    const Placement& p = plan.placements[i];
    const std::string where = "placement " + std::to_string(i);
    const BlockSpec* spec = find_spec(catalog, p.block_id);
    if (spec == nullptr) {
      report.violations.push_back(
          {"unavailable block", where + ": unknown id '" + p.block_id + "'"});
      continue;
    }
    if (++usage[p.block_id] > spec->count) {
      report.violations.push_back(
          {"count exceeded", where + ": block '" + p.block_id + "' used " +
                                 std::to_string(usage[p.block_id]) + " of " +
                                 std::to_string(spec->count)});
    }
    if (!orientation_valid_for(spec->shape, p.orientation)) {
      report.violations.push_back(
          {"invalid orientation",
           where + ": '" + orientation_name(p.orientation) + "' invalid for '" +
               p.block_id + "'"});
    }
    if (!workspace.contains(p.xy_mm)) {
      report.violations.push_back(
          {"out of workspace", where + ": (" + std::to_string(p.xy_mm.x) + ", " +
                                   std::to_string(p.xy_mm.y) + ")"});
    }
  }
  if (!plan.catalog_hash.empty() && plan.catalog_hash != catalog_hash(catalog)) {
    report.violations.push_back({"catalog hash mismatch", plan.catalog_hash});
  }
  return report;
}

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string fnv1a64_hex(const std::string& data) {
  static const char* digits = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace blox

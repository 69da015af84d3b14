// blox: command-line front end for the block-assembly design pipeline.
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 client, 4 internal.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "blox/designer.hpp"
#include "blox/evalharness.hpp"
#include "blox/redesign.hpp"
#include "blox/render.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace blox;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitClient = 3;
constexpr int kExitInternal = 4;

struct ClientUnconfigured : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void print_error(const std::string& type, const std::string& message) {
  const json doc = {{"error", {{"type", type}, {"message", message}}}};
  std::cerr << doc.dump(2) << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

void write_file(const std::string& path, const std::string& content) {
  if (fs::path(path).has_parent_path()) {
    fs::create_directories(fs::path(path).parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << content;
}

// Config file values fill in flags the user did not pass (flags > config
// file > defaults).
class ConfigLayer {
 public:
  explicit ConfigLayer(const std::string& path) {
    if (path.empty()) return;
    doc_ = json::parse(read_file(path), nullptr, false);
    if (doc_.is_discarded() || !doc_.is_object()) {
      throw ParseError("malformed config file: " + path);
    }
  }

  template <typename T>
  void apply(const CLI::Option* opt, const std::string& key, T& value) const {
    if (opt != nullptr && opt->count() > 0) return;  // flag wins
    if (doc_.is_object() && doc_.contains(key)) {
      value = doc_[key].get<T>();
    }
  }

 private:
  json doc_;
};

// "live" or "replay:<dir>"
struct ClientMode {
  bool replay = false;
  std::string replay_path;
};

ClientMode parse_client_mode(const std::string& mode) {
  if (mode == "live") return {};
  if (mode.rfind("replay:", 0) == 0) {
    ClientMode m;
    m.replay = true;
    m.replay_path = mode.substr(7);
    if (m.replay_path.empty()) {
      throw UsageError("replay mode needs a directory: --client replay:<dir>");
    }
    return m;
  }
  throw UsageError("unknown client mode '" + mode +
                   "' (expected 'live' or 'replay:<dir>')");
}

std::unique_ptr<ClientSet> make_client_set(const ClientMode& mode) {
  if (mode.replay) return make_replay_client_set(mode.replay_path);
  const auto config = LiveClientConfig::from_env();
  if (!config) {
    throw ClientUnconfigured(
        "client unconfigured: set BLOX_LM_ENDPOINT, BLOX_LM_MODEL and "
        "BLOX_LM_KEY, or use --client replay:<dir>");
  }
  return make_live_client_set(*config);
}

// Single-session client for the judge commands (recognize, list-objects).
// In replay mode the path may be a transcript file or a directory holding
// judge.json (selector.json accepted as a fallback).
std::unique_ptr<LmClient> make_judge_client(const ClientMode& mode) {
  if (!mode.replay) {
    const auto config = LiveClientConfig::from_env();
    if (!config) {
      throw ClientUnconfigured(
          "client unconfigured: set BLOX_LM_ENDPOINT, BLOX_LM_MODEL and "
          "BLOX_LM_KEY, or use --client replay:<dir>");
    }
    return std::make_unique<LiveClient>(*config);
  }
  fs::path path = mode.replay_path;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "judge.json")) {
      path /= "judge.json";
    } else if (fs::exists(path / "selector.json")) {
      path /= "selector.json";
    } else {
      throw ParseError("no judge.json in replay directory: " +
                       path.string());
    }
  }
  return std::make_unique<ReplayClient>(Transcript::load(path.string()));
}

AssemblyPlan load_validated_plan(const std::string& path,
                                 const Catalog& catalog,
                                 const Workspace& workspace) {
  const AssemblyPlan plan = load_plan(path);
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

PromptLibrary load_prompts(const std::string& dir) {
  return dir.empty() ? PromptLibrary::defaults() : PromptLibrary::load(dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blox: text-prompted block assembly design and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file with defaults")
      ->expected(1);

  // ---- design ----
  auto* design = app.add_subcommand("design",
                                    "Generate, repair, rate and select "
                                    "candidate assemblies for a prompt");
  std::string d_prompt, d_catalog, d_out, d_client = "live", d_prompts_dir;
  int d_candidates = 10;
  auto* d_prompt_opt = design->add_option("--prompt", d_prompt, "Object to design");
  auto* d_catalog_opt = design->add_option("--catalog", d_catalog, "Catalog JSON");
  auto* d_out_opt = design->add_option("--out", d_out, "Run directory");
  auto* d_cand_opt =
      design->add_option("--candidates", d_candidates, "Candidate chains");
  auto* d_client_opt =
      design->add_option("--client", d_client, "live | replay:<dir>");
  design->add_option("--prompts", d_prompts_dir, "Prompt template directory");

  // ---- redesign ----
  auto* redesign_cmd = app.add_subcommand(
      "redesign", "Perturbation pass making a plan robust to placement noise");
  std::string r_plan, r_catalog, r_out;
  RedesignParams r_params;
  auto* r_plan_opt = redesign_cmd->add_option("--plan", r_plan, "Plan JSON");
  auto* r_catalog_opt =
      redesign_cmd->add_option("--catalog", r_catalog, "Catalog JSON");
  auto* r_out_opt = redesign_cmd->add_option("--out", r_out, "Output directory");
  redesign_cmd->add_option("--collision-threshold",
                           r_params.collision_threshold_mm,
                           "Proximity threshold in mm");
  redesign_cmd->add_option("--max-visits", r_params.max_visits_per_block,
                           "Perturbation visits per block");

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand(
      "eval", "Noisy constructability trials (ablation or single-arm)");
  std::string e_plan, e_catalog, e_out, e_format = "json";
  int e_trials = 100;
  double e_sigma = 3.0;
  std::uint64_t e_seed = 0;
  bool e_single_arm = false;
  auto* e_plan_opt = eval_cmd->add_option("--plan", e_plan, "Plan JSON");
  auto* e_catalog_opt = eval_cmd->add_option("--catalog", e_catalog, "Catalog JSON");
  auto* e_out_opt = eval_cmd->add_option("--out", e_out, "Output directory");
  auto* e_trials_opt = eval_cmd->add_option("--trials", e_trials, "Trials per arm");
  auto* e_sigma_opt =
      eval_cmd->add_option("--sigma", e_sigma, "Placement noise sigma in mm");
  auto* e_seed_opt = eval_cmd->add_option("--seed", e_seed, "Base seed");
  eval_cmd->add_flag("--single-arm", e_single_arm,
                     "Evaluate only the plan as given (no redesign arm)");
  eval_cmd->add_option("--format", e_format, "csv | json")
      ->check(CLI::IsMember({"csv", "json"}));

  // ---- render ----
  auto* render_cmd =
      app.add_subcommand("render", "Orthographic views and mesh for a plan");
  std::string v_plan, v_catalog, v_out;
  std::vector<std::string> v_views = {"front", "side"};
  bool v_mesh = false;
  auto* v_plan_opt = render_cmd->add_option("--plan", v_plan, "Plan JSON");
  auto* v_catalog_opt = render_cmd->add_option("--catalog", v_catalog, "Catalog JSON");
  auto* v_out_opt = render_cmd->add_option("--out", v_out, "Output directory");
  render_cmd->add_option("--views", v_views, "front, side, top");
  render_cmd->add_flag("--mesh", v_mesh, "Also export a triangle mesh");

  // ---- recognize ----
  auto* recognize_cmd = app.add_subcommand(
      "recognize", "Forced-choice recognizability of rendered assemblies");
  std::string g_manifest, g_pool, g_out, g_client = "live", g_prompts_dir;
  int g_distractors = 4;
  std::uint64_t g_seed = 0;
  auto* g_manifest_opt = recognize_cmd->add_option(
      "--exhibits", g_manifest,
      "JSON array of {\"prompt\": ..., \"render\": ...}");
  auto* g_pool_opt = recognize_cmd->add_option(
      "--pool", g_pool, "Label pool file, one label per line");
  auto* g_out_opt = recognize_cmd->add_option("--out", g_out, "Output file");
  recognize_cmd->add_option("--distractors", g_distractors,
                            "Distractor labels per item");
  recognize_cmd->add_option("--seed", g_seed, "Shuffle seed");
  auto* g_client_opt =
      recognize_cmd->add_option("--client", g_client, "live | replay:<dir>");
  recognize_cmd->add_option("--prompts", g_prompts_dir,
                            "Prompt template directory");

  // ---- list-objects ----
  auto* list_cmd =
      app.add_subcommand("list-objects", "Ask the model for buildable objects");
  int l_count = 10;
  std::string l_client = "live", l_prompts_dir;
  list_cmd->add_option("--n", l_count, "Number of objects");
  auto* l_client_opt =
      list_cmd->add_option("--client", l_client, "live | replay:<dir>");
  list_cmd->add_option("--prompts", l_prompts_dir, "Prompt template directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    const ConfigLayer config(config_path);

    if (design->parsed()) {
      config.apply(d_prompt_opt, "prompt", d_prompt);
      config.apply(d_catalog_opt, "catalog", d_catalog);
      config.apply(d_out_opt, "out", d_out);
      config.apply(d_cand_opt, "candidates", d_candidates);
      config.apply(d_client_opt, "client", d_client);
      if (d_prompt.empty() || d_catalog.empty() || d_out.empty()) {
        throw UsageError("design requires --prompt, --catalog and --out");
      }
      const Catalog catalog = load_catalog(d_catalog);
      auto clients = make_client_set(parse_client_mode(d_client));
      DesignRunConfig run;
      run.prompt = d_prompt;
      run.candidates = d_candidates;
      run.out_dir = d_out;
      run.prompts = load_prompts(d_prompts_dir);
      const DesignRunResult result =
          run_design_pipeline(run, catalog, *clients);
      std::cout << "winner " << plan_hash(result.winner.plan) << " rating "
                << result.winner.rating.value_or(0) << " ("
                << result.generated << " candidates, "
                << result.failures.size() << " failed chains)\n";
      return 0;
    }

    if (redesign_cmd->parsed()) {
      config.apply(r_plan_opt, "plan", r_plan);
      config.apply(r_catalog_opt, "catalog", r_catalog);
      config.apply(r_out_opt, "out", r_out);
      if (r_plan.empty() || r_catalog.empty() || r_out.empty()) {
        throw UsageError("redesign requires --plan, --catalog and --out");
      }
      const Catalog catalog = load_catalog(r_catalog);
      const SimParams sim;
      const AssemblyPlan plan =
          load_validated_plan(r_plan, catalog, sim.workspace);
      const RedesignResult result = redesign(plan, catalog, r_params, sim);
      fs::create_directories(r_out);
      save_plan(result.plan,
                (fs::path(r_out) / "redesigned.plan.json").string());
      write_file((fs::path(r_out) / "redesign_report.json").string(),
                 result.report.to_json());
      std::cout << (result.report.converged ? "converged" : "capped") << ", "
                << result.report.adjusted.size() << " adjustments, "
                << result.report.infeasible.size() << " infeasible\n";
      return result.report.final_stability.stable ? 0 : kExitValidation;
    }

    if (eval_cmd->parsed()) {
      config.apply(e_plan_opt, "plan", e_plan);
      config.apply(e_catalog_opt, "catalog", e_catalog);
      config.apply(e_out_opt, "out", e_out);
      config.apply(e_trials_opt, "trials", e_trials);
      config.apply(e_sigma_opt, "sigma", e_sigma);
      config.apply(e_seed_opt, "seed", e_seed);
      if (e_plan.empty() || e_catalog.empty() || e_out.empty()) {
        throw UsageError("eval requires --plan, --catalog and --out");
      }
      const Catalog catalog = load_catalog(e_catalog);
      const SimParams sim;
      const AssemblyPlan plan =
          load_validated_plan(e_plan, catalog, sim.workspace);
      AblationConfig ablation;
      ablation.trials = e_trials;
      ablation.sigma_mm = e_sigma;
      ablation.base_seed = e_seed;
      AblationResult result;
      if (e_single_arm) {
        // one arm, no perturbation pass: the plan is evaluated as given
        result.redesigned_plan = plan;
        result.baseline.name = "baseline";
        double frac_sum = 0;
        int completions = 0;
        for (int t = 0; t < ablation.trials; ++t) {
          const TrialResult trial = simulate_trial(
              plan, catalog, sim, ablation.sigma_mm, ablation.base_seed + t);
          frac_sum += trial.metrics.fraction_correct();
          if (trial.metrics.full_completion) ++completions;
          result.baseline.per_trial.push_back(trial.metrics);
        }
        if (ablation.trials > 0) {
          result.baseline.mean_fraction_correct = frac_sum / ablation.trials;
          result.baseline.completion_rate =
              static_cast<double>(completions) / ablation.trials;
        }
        result.redesigned = result.baseline;
        result.redesigned.name = "single-arm";
      } else {
        result = run_ablation(plan, catalog, sim, ablation);
      }
      write_file((fs::path(e_out) / ("metrics." + e_format)).string(),
                 e_format == "csv" ? ablation_to_csv(result)
                                   : ablation_to_json(result));
      std::cout << "baseline completion " << result.baseline.completion_rate
                << ", redesigned completion "
                << result.redesigned.completion_rate << "\n";
      return 0;
    }

    if (render_cmd->parsed()) {
      config.apply(v_plan_opt, "plan", v_plan);
      config.apply(v_catalog_opt, "catalog", v_catalog);
      config.apply(v_out_opt, "out", v_out);
      if (v_plan.empty() || v_catalog.empty() || v_out.empty()) {
        throw UsageError("render requires --plan, --catalog and --out");
      }
      const Catalog catalog = load_catalog(v_catalog);
      const SimParams sim;
      const AssemblyPlan plan =
          load_validated_plan(v_plan, catalog, sim.workspace);
      const SettleResult settled = settle_plan(plan, catalog, sim);
      fs::create_directories(v_out);
      for (const std::string& view : v_views) {
        ViewAxis axis;
        if (view == "front") {
          axis = ViewAxis::Front;
        } else if (view == "side") {
          axis = ViewAxis::Side;
        } else if (view == "top") {
          axis = ViewAxis::Top;
        } else {
          throw UsageError("unknown view '" + view + "'");
        }
        write_ppm(render_ortho(settled.scene, axis).image,
                  (fs::path(v_out) / (view + ".ppm")).string());
      }
      if (v_mesh) {
        export_mesh(settled.scene, (fs::path(v_out) / "scene.obj").string());
      }
      return 0;
    }

    if (recognize_cmd->parsed()) {
      config.apply(g_manifest_opt, "exhibits", g_manifest);
      config.apply(g_pool_opt, "pool", g_pool);
      config.apply(g_out_opt, "out", g_out);
      config.apply(g_client_opt, "client", g_client);
      if (g_manifest.empty() || g_pool.empty() || g_out.empty()) {
        throw UsageError("recognize requires --exhibits, --pool and --out");
      }
      const json exhibits_doc = json::parse(read_file(g_manifest));
      std::vector<AssemblyExhibit> exhibits;
      for (const auto& entry : exhibits_doc) {
        exhibits.push_back({entry.at("prompt").get<std::string>(),
                            entry.at("render").get<std::string>()});
      }
      std::vector<std::string> pool;
      std::istringstream pool_lines(read_file(g_pool));
      for (std::string line; std::getline(pool_lines, line);) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
          line.pop_back();
        }
        if (!line.empty()) pool.push_back(line);
      }
      auto judge = make_judge_client(parse_client_mode(g_client));
      RecognizabilityConfig cfg;
      cfg.distractors = g_distractors;
      cfg.seed = g_seed;
      const RecognizabilityResult result = run_recognizability(
          exhibits, pool, *judge, load_prompts(g_prompts_dir), cfg);
      write_file(g_out, recognizability_to_json(result));
      std::cout << "accuracy " << result.accuracy << " over "
                << result.items.size() << " exhibits\n";
      return 0;
    }

    if (list_cmd->parsed()) {
      config.apply(l_client_opt, "client", l_client);
      auto client = make_judge_client(parse_client_mode(l_client));
      const auto objects =
          list_objects(l_count, *client, load_prompts(l_prompts_dir));
      for (const std::string& name : objects) std::cout << name << "\n";
      return 0;
    }

    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    print_error("usage", e.what());
    return kExitUsage;
  } catch (const ClientUnconfigured& e) {
    print_error("client", e.what());
    return kExitClient;
  } catch (const LmError& e) {
    print_error("client", e.what());
    return kExitClient;
  } catch (const NoCandidatesError& e) {
    print_error("client", e.what());
    return kExitClient;
  } catch (const ProtocolError& e) {
    print_error("client", e.what());
    return kExitClient;
  } catch (const ValidationError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const DropError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const ParseError& e) {
    print_error("validation", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return kExitInternal;
  }
}

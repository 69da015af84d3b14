#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "blox/lm_client.hpp"
#include "blox/render.hpp"
#include "blox/statics.hpp"

namespace blox {

struct NoCandidatesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Versioned prompt templates; files in a prompts directory override the
// built-in defaults ({placeholder} substitution).
struct PromptLibrary {
  std::string elaborate;
  std::string plan_roles;
  std::string generate;
  std::string repair;
  std::string rate;
  std::string rate_retry;
  std::string compare;
  std::string recognize;
  std::string list_objects;

  static PromptLibrary defaults();
  static PromptLibrary load(const std::string& dir);
};

std::string fill_template(std::string tmpl,
                          const std::vector<std::pair<std::string, std::string>>&
                              substitutions);

struct DesignCandidate {
  AssemblyPlan plan;
  Scene scene;
  StabilityReport report;
  std::optional<int> rating;
  bool rating_clamped = false;
  int repair_rounds = 0;
  std::string front_render_path;
  std::string side_render_path;
  std::string transcript_id;
};

// Chain/selector client bundle; one session per candidate chain plus one for
// rating and knockout calls.
class ClientSet {
 public:
  virtual ~ClientSet() = default;
  virtual LmClient& chain(int idx) = 0;
  virtual LmClient& selector() = 0;
  virtual int chain_limit() const = 0;  // replay: bundled chain count
  virtual std::string chain_transcript_id(int idx) const = 0;
  virtual void save_transcripts(const std::string& dir) {}
};

std::unique_ptr<ClientSet> make_replay_client_set(const std::string& dir);
std::unique_ptr<ClientSet> make_live_client_set(const LiveClientConfig& config);

// ---- Phase I operations ----

std::string elaborate(const std::string& prompt, LmClient& client,
                      const PromptLibrary& prompts);

std::string plan_blocks(const std::string& prompt, const std::string& elaboration,
                        const Catalog& catalog, LmClient& client,
                        const PromptLibrary& prompts);

// Extracts the first fenced JSON block from a model reply.
std::string extract_fenced_json(const std::string& text);

// Parses the model's structured plan output ({placements, order}) against
// the catalog. Throws ParseError / ValidationError.
AssemblyPlan parse_model_plan(const std::string& reply, const std::string& prompt,
                              const Catalog& catalog,
                              const Workspace& workspace = {});

AssemblyPlan generate_plan(const std::string& prompt,
                           const std::string& elaboration,
                           const std::string& roles, const Catalog& catalog,
                           LmClient& client, const PromptLibrary& prompts,
                           const Workspace& workspace = {});

DesignCandidate repair_loop(DesignCandidate candidate, const Catalog& catalog,
                            const SimParams& sim, LmClient& client,
                            const PromptLibrary& prompts,
                            const std::string& render_dir, int max_rounds = 2);

struct ChainFailure {
  int chain = 0;
  std::string reason;
};

std::vector<DesignCandidate> generate_candidates(
    const std::string& prompt, const Catalog& catalog, const SimParams& sim,
    ClientSet& clients, int n, const PromptLibrary& prompts,
    const std::string& render_dir, std::vector<ChainFailure>* failures = nullptr);

int rate_candidate(DesignCandidate& candidate, LmClient& client,
                   const PromptLibrary& prompts);

DesignCandidate select_best(std::vector<DesignCandidate> candidates,
                            LmClient& client, const PromptLibrary& prompts);

std::vector<std::string> list_objects(int n, LmClient& client,
                                      const PromptLibrary& prompts);

// ---- end-to-end pipeline (run-directory bookkeeping) ----

struct DesignRunConfig {
  std::string prompt;
  int candidates = 10;
  std::string out_dir;
  PromptLibrary prompts = PromptLibrary::defaults();
  SimParams sim;
};

struct DesignRunResult {
  DesignCandidate winner;
  int generated = 0;
  std::vector<ChainFailure> failures;
};

DesignRunResult run_design_pipeline(const DesignRunConfig& config,
                                    const Catalog& catalog, ClientSet& clients);

}  // namespace blox

#pragma once

// Orchestration for the CLI: layered run configuration, suite execution
// over the simulator with shared memory stores, result files, and the
// offline rule-distillation pass over saved traces.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "himm/cognitive_controller.hpp"
#include "himm/persistence.hpp"
#include "himm/simulator.hpp"

namespace himm {

enum class GatewayMode { Mock, Wire };

// Everything a run needs beyond the scene and script. Mock mode is fully
// offline: chat follows a built-in policy script (extendable from a
// script file) and embeddings are synthetic over the scene vocabulary.
struct RunConfig {
    AgentConfig agent;
    GatewayMode gateway = GatewayMode::Mock;
    std::string chat_script;     // optional scripted-reply file, mock mode
    std::string api_base;        // wire mode
    std::string api_key;
    std::string chat_model;
    std::string embed_model;
    std::string vocabulary_file; // empty = built-in vocabulary
    uint64_t seed = 0;
};

// Applies one "key value" assignment; throws ConfigError on an unknown
// key or unparseable value. The layering below is built from this.
void apply_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

// Layered resolution, weakest first: JSON config file (optional, "" =
// none), then environment pairs, then flag pairs.
RunConfig resolve_config(const std::string& config_path,
                         const std::vector<std::pair<std::string, std::string>>& env,
                         const std::vector<std::pair<std::string, std::string>>& flags);

// Reads the HIMM_* variables from the process environment.
std::vector<std::pair<std::string, std::string>> config_env_pairs();

// Canonical one-line-per-key rendering; credentials reduced to presence.
std::string render_config(const RunConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);

// The chat side of a run: the built-in mock policy, optionally shadowed
// by rules from cfg.chat_script, or the wire client.
std::unique_ptr<ChatClient> make_chat_client(const RunConfig& cfg);

// Deterministic policy replies that drive the agent loop end to end
// without a model: follow recalled routes, affirm verifications, pick
// the first frontier, answer "unknown".
ScriptedChatClient make_policy_client();

struct SuiteEpisodeRef {
    std::string scene_path;
    std::string script_path;
};

struct SuiteSpec {
    std::vector<SuiteEpisodeRef> episodes;
};

// Suite file: one "episode <scene> <script>" row per run; relative paths
// are resolved against the suite file's directory on load.
SuiteSpec load_suite(const std::string& path);
void save_suite(const SuiteSpec& suite, const std::string& path);

struct SuiteAggregates {
    std::optional<double> success_rate;
    std::optional<double> mean_spl;
    std::optional<double> mean_steps;
    std::optional<double> match_rate;
};

SuiteAggregates compute_aggregates(const std::vector<EpisodeResult>& rows);

struct SuiteResult {
    std::vector<EpisodeResult> episodes; // suite order
    SuiteAggregates aggregates;
    std::string config_fingerprint;
    uint64_t seed = 0;
};

// Runs every episode through the simulator. Failures to even start an
// episode (bad files) are recorded as aborted rows; the suite continues.
// With recall enabled the episodes share `episodic` (a fresh local store
// when null) and run sequentially so each episode can retrieve its
// predecessors; otherwise up to `jobs` run concurrently.
SuiteResult run_suite(const SuiteSpec& suite, const RunConfig& cfg, int jobs,
                      EpisodicStore* episodic, const RuleStore* rules);

// Result file. Saving re-derives the aggregates from the rows and
// refuses to emit a result whose stored aggregates disagree.
void save_suite_result(const SuiteResult& result, const std::string& path);
SuiteResult load_suite_result(const std::string& path);

// Fixed-width human-readable table plus the aggregate line.
std::string render_suite_table(const SuiteResult& result);

// "key value" lines for one episode, stdout-friendly.
std::string render_episode_result(const EpisodeResult& r);

struct DistillSummary {
    int traces = 0;
    int distilled = 0;
    int failed = 0;
    size_t rules_added = 0;
};

// Runs rule distillation over every .trace file in the directory
// (lexicographic order). Per-trace extraction failures are counted and
// skipped; the pass continues.
DistillSummary build_semantic_memory(const std::string& train_dir,
                                     const ThresholdSchedule& schedule, ChatClient& llm,
                                     Embedder& embedder, RuleStore& store);

} // namespace himm

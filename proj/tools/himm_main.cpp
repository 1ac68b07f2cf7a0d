#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "himm/harness.hpp"

namespace fs = std::filesystem;
using namespace himm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitEpisodeFailure = 1;
constexpr int kExitConfigError = 2;

// Flags each subcommand may layer on top of config file and environment.
struct CommonFlags {
    std::string config_path;
    std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common_options(CLI::App* sub, CommonFlags& common) {
    sub->add_option("--config", common.config_path, "JSON config file");
    const auto forward = [&common, sub](const std::string& flag, const std::string& key) {
        // Stash raw values; resolve_config applies them after file and env.
        sub->add_option_function<std::string>(
            flag,
            [&common, key](const std::string& v) { common.overrides.push_back({key, v}); });
    };
    forward("--seed", "seed");
    forward("--recall", "recall");
    forward("--llm", "gateway");
    forward("--chat-script", "chat_script");
    forward("--vocabulary", "vocabulary");
    forward("--candidate-trigger", "candidate_trigger");
    forward("--step-budget", "step_budget");
}

RunConfig resolve_common(const CommonFlags& common) {
    return resolve_config(common.config_path, config_env_pairs(), common.overrides);
}

// "--rules <file|off>": off disables rule retrieval entirely, a path
// loads the store; unset leaves memory-dir rules (if any) active.
struct RuleChoice {
    bool disabled = false;
    std::string path;
};

Pose last_observed_pose(const EpisodeRecord& record) {
    const SemanticStore& s = record.semantic_space;
    return s.empty() ? Pose{} : s.at(s.size() - 1).pose;
}

AnnotatedExplorationMap annotate_record(const EpisodeRecord& record) {
    AnnotatedExplorationMap map;
    map.grid = record.physical_space;
    map.frontiers = extract_frontiers(map.grid);
    map.agent_pose = last_observed_pose(record);
    return map;
}

int cmd_run_episode(const CommonFlags& common, const std::string& scene_path,
                    const std::string& script_path, const std::string& question_override,
                    const RuleChoice& rules_choice, const std::string& memory_dir,
                    const std::string& log_out, const std::string& map_out,
                    bool ascii_map) {
    RunConfig cfg = resolve_common(common);
    validate_config(cfg.agent);

    SceneSpec scene = load_scene(scene_path);
    EpisodeScript script = load_script(script_path);
    if (!question_override.empty()) script.question = question_override;
    const std::vector<std::string> vocab = cfg.vocabulary_file.empty()
                                               ? default_vocabulary()
                                               : load_vocabulary(cfg.vocabulary_file);
    validate_scene(scene, vocab);
    validate_script(script, scene);

    MemoryStores stores;
    const bool have_snapshot =
        !memory_dir.empty() && fs::exists(fs::path(memory_dir) / "manifest.mem");
    if (have_snapshot) stores = load_memory(memory_dir);

    std::optional<RuleStore> file_rules;
    if (!rules_choice.path.empty()) file_rules = load_rules(rules_choice.path);
    const RuleStore* active_rules = nullptr;
    if (!rules_choice.disabled && cfg.agent.rules_enabled) {
        if (file_rules) active_rules = &*file_rules;
        else if (!stores.rules.empty()) active_rules = &stores.rules;
    }
    if (rules_choice.disabled) cfg.agent.rules_enabled = false;

    SyntheticEmbedder embedder(vocab, 384, cfg.seed);
    auto chat = make_chat_client(cfg);
    ChatClient* judge = cfg.gateway == GatewayMode::Wire ? chat.get() : nullptr;
    SimEnvironment env(scene, script, embedder, judge);
    GoalSpec goal = make_goal(script.question, script.target_category, {}, {}, embedder);

    const std::string episode_id = fs::path(script_path).stem().string() + "-" +
                                   std::to_string(stores.episodic.size());
    EpisodeResult result = run_episode(cfg.agent, goal, episode_id, env, *chat, embedder,
                                       &stores.episodic, active_rules);
    std::cout << render_episode_result(result);

    if (!log_out.empty()) {
        EpisodeTrace trace;
        trace.log = result.log;
        trace.gt = script.gt_trajectory;
        trace.gt_answer = script.gt_answer;
        save_trace(trace, log_out);
    }
    if (!map_out.empty()) {
        const EpisodeRecord* record = stores.episodic.find(episode_id);
        if (record) save_map_pgm(record->physical_space, map_out, !ascii_map);
        else std::cerr << "no map to export: episode aborted before mapping\n";
    }
    if (!memory_dir.empty()) {
        const RuleStore& to_save = file_rules ? *file_rules : stores.rules;
        snapshot_memory(stores.episodic, to_save, memory_dir);
    }
    return result.success ? kExitOk : kExitEpisodeFailure;
}

int cmd_run_suite(const CommonFlags& common, const std::string& suite_path, int jobs,
                  const RuleChoice& rules_choice, const std::string& memory_dir,
                  const std::string& out_path) {
    RunConfig cfg = resolve_common(common);
    validate_config(cfg.agent);
    SuiteSpec suite = load_suite(suite_path);

    MemoryStores stores;
    const bool have_snapshot =
        !memory_dir.empty() && fs::exists(fs::path(memory_dir) / "manifest.mem");
    if (have_snapshot) stores = load_memory(memory_dir);

    std::optional<RuleStore> file_rules;
    if (!rules_choice.path.empty()) file_rules = load_rules(rules_choice.path);
    const RuleStore* active_rules = nullptr;
    if (!rules_choice.disabled && cfg.agent.rules_enabled) {
        if (file_rules) active_rules = &*file_rules;
        else if (!stores.rules.empty()) active_rules = &stores.rules;
    }
    if (rules_choice.disabled) cfg.agent.rules_enabled = false;

    EpisodicStore* episodic = memory_dir.empty() ? nullptr : &stores.episodic;
    SuiteResult result = run_suite(suite, cfg, jobs, episodic, active_rules);
    std::cout << render_suite_table(result);
    if (!out_path.empty()) save_suite_result(result, out_path);
    if (!memory_dir.empty()) {
        const RuleStore& to_save = file_rules ? *file_rules : stores.rules;
        snapshot_memory(stores.episodic, to_save, memory_dir);
    }
    for (const EpisodeResult& r : result.episodes)
        if (!r.success) return kExitEpisodeFailure;
    return kExitOk;
}

int cmd_build_semantic_memory(const CommonFlags& common, const std::string& train_dir,
                              const std::string& out_path) {
    RunConfig cfg = resolve_common(common);
    const std::vector<std::string> vocab = cfg.vocabulary_file.empty()
                                               ? default_vocabulary()
                                               : load_vocabulary(cfg.vocabulary_file);
    SyntheticEmbedder embedder(vocab, 384, cfg.seed);
    auto chat = make_chat_client(cfg);
    ThresholdSchedule schedule;
    schedule.rng_seed = cfg.seed;
    RuleStore store(embedder.dim());
    DistillSummary summary =
        build_semantic_memory(train_dir, schedule, *chat, embedder, store);
    save_rules(store, out_path);
    std::cout << "traces " << summary.traces << "\n"
              << "distilled " << summary.distilled << "\n"
              << "failed " << summary.failed << "\n"
              << "rules_added " << summary.rules_added << "\n"
              << "rules_file " << out_path << "\n";
    return summary.traces > 0 && summary.distilled == 0 ? kExitEpisodeFailure : kExitOk;
}

int cmd_inspect_memory(const CommonFlags& common, const std::string& memory_dir,
                       const std::string& semantic_path, const std::string& rules_path,
                       const std::string& query, const std::string& question,
                       int top_k) {
    RunConfig cfg = resolve_common(common);
    const std::vector<std::string> vocab = cfg.vocabulary_file.empty()
                                               ? default_vocabulary()
                                               : load_vocabulary(cfg.vocabulary_file);
    SyntheticEmbedder embedder(vocab, 384, cfg.seed);

    if (memory_dir.empty() && semantic_path.empty() && rules_path.empty())
        throw ConfigError("inspect-memory needs --memory-dir, --semantic, or --rules");

    if (!memory_dir.empty()) {
        MemoryStores stores = load_memory(memory_dir);
        std::cout << "episodes " << stores.episodic.size() << "\n";
        for (const EpisodeRecord& ep : stores.episodic.episodes())
            std::cout << "episode " << ep.episode_id << " observations "
                      << ep.semantic_space.size() << " regions "
                      << ep.semantic_space.region_count() << " map "
                      << ep.physical_space.width() << "x" << ep.physical_space.height()
                      << "\n";
        std::cout << "rules " << stores.rules.size() << "\n";
        if (!query.empty()) {
            const std::vector<float> q = embedder.embed(query);
            struct Hit {
                std::string episode;
                std::string obs;
                uint32_t region;
                double sim;
            };
            std::vector<Hit> hits;
            for (const EpisodeRecord& ep : stores.episodic.episodes())
                for (const RegionMatch& m :
                     ep.semantic_space.query_regions(q, size_t(top_k)))
                    hits.push_back({ep.episode_id, m.observation_id, m.region_index,
                                    m.similarity});
            std::stable_sort(hits.begin(), hits.end(),
                             [](const Hit& a, const Hit& b) { return a.sim > b.sim; });
            if (hits.size() > size_t(top_k)) hits.resize(size_t(top_k));
            for (const Hit& h : hits)
                std::cout << "match " << h.episode << " " << h.obs << " region "
                          << h.region << " similarity " << h.sim << "\n";
        }
        if (!question.empty() && !stores.rules.empty())
            for (const ScoredRule& s :
                 retrieve_rules(stores.rules, question, embedder, size_t(top_k)))
                std::cout << "rule [" << rule_form_name(s.rule.form) << "] "
                          << s.rule.anchor << ": " << s.rule.key << " -> " << s.rule.value
                          << " similarity " << s.similarity << "\n";
        return kExitOk;
    }

    if (!semantic_path.empty()) {
        SemanticStore store = load_semantic(semantic_path);
        std::cout << "observations " << store.size() << "\n"
                  << "regions " << store.region_count() << "\n"
                  << "dim " << store.dim() << "\n";
        if (!query.empty())
            for (const RegionMatch& m :
                 store.query_regions(embedder.embed(query), size_t(top_k)))
                std::cout << "match " << m.observation_id << " region " << m.region_index
                          << " similarity " << m.similarity << "\n";
    }
    if (!rules_path.empty()) {
        RuleStore store = load_rules(rules_path);
        std::cout << "rules " << store.size() << "\n"
                  << "dim " << store.dim() << "\n";
        if (!question.empty())
            for (const ScoredRule& s :
                 retrieve_rules(store, question, embedder, size_t(top_k)))
                std::cout << "rule [" << rule_form_name(s.rule.form) << "] "
                          << s.rule.anchor << ": " << s.rule.key << " -> " << s.rule.value
                          << " similarity " << s.similarity << "\n";
    }
    return kExitOk;
}

int cmd_gen_scenes(int count, uint64_t seed, const std::string& out_dir) {
    if (count < 1) throw ConfigError("--count must be >= 1");
    fs::create_directories(out_dir);
    SuiteSpec suite;
    for (int i = 0; i < count; ++i) {
        auto [scene, script] = generate_scene(seed + uint64_t(i));
        std::string n = std::to_string(i);
        while (n.size() < 4) n.insert(n.begin(), '0');
        const std::string scene_name = "scene-" + n + ".scene";
        const std::string script_name = "script-" + n + ".script";
        script.scene_ref = scene_name;
        save_scene(scene, (fs::path(out_dir) / scene_name).string());
        save_script(script, (fs::path(out_dir) / script_name).string());
        suite.episodes.push_back({scene_name, script_name});
        std::cout << "scene " << scene_name << " script " << script_name << "\n";
    }
    save_vocabulary(default_vocabulary(), (fs::path(out_dir) / "vocab.txt").string());
    save_suite(suite, (fs::path(out_dir) / "all.suite").string());
    std::cout << "suite all.suite\nvocabulary vocab.txt\n";
    return kExitOk;
}

int cmd_export_map(const std::string& episode_path, const std::string& memory_dir,
                   const std::string& episode_id, const std::string& pgm_out,
                   const std::string& text_out, bool ascii) {
    EpisodeRecord record;
    if (!episode_path.empty()) {
        record = load_episode_record(episode_path);
    } else if (!memory_dir.empty()) {
        EpisodicStore store = load_episodic(memory_dir);
        if (store.empty()) throw ValidationError("memory holds no episodes");
        if (episode_id.empty()) {
            record = store.episodes().back();
        } else {
            const EpisodeRecord* found = store.find(episode_id);
            if (!found) throw ValidationError("no such episode: " + episode_id);
            record = *found;
        }
    } else {
        throw ConfigError("export-map needs --episode or --memory-dir");
    }
    if (pgm_out.empty() && text_out.empty())
        throw ConfigError("export-map needs --pgm-out or --text-out");
    if (!pgm_out.empty()) save_map_pgm(record.physical_space, pgm_out, !ascii);
    if (!text_out.empty()) save_annotated_map(annotate_record(record), text_out);
    std::cout << "map " << record.physical_space.width() << "x"
              << record.physical_space.height() << " resolution "
              << record.physical_space.resolution() << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"episodic/semantic memory exploration agent"};
    app.require_subcommand(1);
    int exit_code = kExitOk;

    // run-episode
    {
        auto* sub = app.add_subcommand("run-episode", "run one scripted episode");
        auto common = std::make_shared<CommonFlags>();
        auto scene = std::make_shared<std::string>();
        auto script = std::make_shared<std::string>();
        auto question = std::make_shared<std::string>();
        auto rules_path = std::make_shared<std::string>();
        auto memory_dir = std::make_shared<std::string>();
        auto log_out = std::make_shared<std::string>();
        auto map_out = std::make_shared<std::string>();
        auto ascii_map = std::make_shared<bool>(false);
        sub->add_option("--scene", *scene, "scene file")->required();
        sub->add_option("--script", *script, "episode script file")->required();
        sub->add_option("--question", *question, "override the script's question");
        sub->add_option("--rules", *rules_path, "rule store file, or 'off'");
        sub->add_option("--memory-dir", *memory_dir, "episodic memory directory");
        sub->add_option("--log-out", *log_out, "write the reasoning trace here");
        sub->add_option("--map-out", *map_out, "write the final map as PGM here");
        sub->add_flag("--ascii-map", *ascii_map, "P2 instead of P5");
        add_common_options(sub, *common);
        sub->callback([=, &exit_code] {
            RuleChoice rc;
            if (*rules_path == "off") rc.disabled = true;
            else rc.path = *rules_path;
            exit_code = cmd_run_episode(*common, *scene, *script, *question, rc,
                                        *memory_dir, *log_out, *map_out, *ascii_map);
        });
    }

    // run-suite
    {
        auto* sub = app.add_subcommand("run-suite", "run every episode in a suite");
        auto common = std::make_shared<CommonFlags>();
        auto suite = std::make_shared<std::string>();
        auto jobs = std::make_shared<int>(1);
        auto rules_path = std::make_shared<std::string>();
        auto memory_dir = std::make_shared<std::string>();
        auto out_path = std::make_shared<std::string>();
        sub->add_option("--suite", *suite, "suite file")->required();
        sub->add_option("--jobs", *jobs, "parallel episodes when recall is off");
        sub->add_option("--rules", *rules_path, "rule store file, or 'off'");
        sub->add_option("--memory-dir", *memory_dir, "episodic memory directory");
        sub->add_option("--out", *out_path, "write the structured result file here");
        add_common_options(sub, *common);
        sub->callback([=, &exit_code] {
            RuleChoice rc;
            if (*rules_path == "off") rc.disabled = true;
            else rc.path = *rules_path;
            exit_code = cmd_run_suite(*common, *suite, *jobs, rc, *memory_dir, *out_path);
        });
    }

    // build-semantic-memory
    {
        auto* sub = app.add_subcommand("build-semantic-memory",
                                       "distill rules from saved traces");
        auto common = std::make_shared<CommonFlags>();
        auto train_dir = std::make_shared<std::string>();
        auto out_path = std::make_shared<std::string>();
        sub->add_option("--train-dir", *train_dir, "directory of .trace files")->required();
        sub->add_option("--out", *out_path, "rule store output file")->required();
        add_common_options(sub, *common);
        sub->callback([=, &exit_code] {
            exit_code = cmd_build_semantic_memory(*common, *train_dir, *out_path);
        });
    }

    // inspect-memory
    {
        auto* sub = app.add_subcommand("inspect-memory", "summarize and query stores");
        auto common = std::make_shared<CommonFlags>();
        auto memory_dir = std::make_shared<std::string>();
        auto semantic = std::make_shared<std::string>();
        auto rules = std::make_shared<std::string>();
        auto query = std::make_shared<std::string>();
        auto question = std::make_shared<std::string>();
        auto top_k = std::make_shared<int>(5);
        sub->add_option("--memory-dir", *memory_dir, "memory snapshot directory");
        sub->add_option("--semantic", *semantic, "semantic store file");
        sub->add_option("--rules", *rules, "rule store file");
        sub->add_option("--query", *query, "text query over region embeddings");
        sub->add_option("--question", *question, "question for rule retrieval");
        sub->add_option("--top-k", *top_k, "matches to print")->check(CLI::PositiveNumber);
        add_common_options(sub, *common);
        sub->callback([=, &exit_code] {
            exit_code = cmd_inspect_memory(*common, *memory_dir, *semantic, *rules, *query,
                                           *question, *top_k);
        });
    }

    // gen-scenes
    {
        auto* sub = app.add_subcommand("gen-scenes", "generate random scenes and scripts");
        auto count = std::make_shared<int>(1);
        auto seed = std::make_shared<uint64_t>(0);
        auto out_dir = std::make_shared<std::string>();
        sub->add_option("--count", *count, "scenes to generate")->required();
        sub->add_option("--seed", *seed, "generator seed");
        sub->add_option("--out", *out_dir, "output directory")->required();
        sub->callback(
            [=, &exit_code] { exit_code = cmd_gen_scenes(*count, *seed, *out_dir); });
    }

    // export-map
    {
        auto* sub = app.add_subcommand("export-map", "export an episode's occupancy map");
        auto episode = std::make_shared<std::string>();
        auto memory_dir = std::make_shared<std::string>();
        auto episode_id = std::make_shared<std::string>();
        auto pgm_out = std::make_shared<std::string>();
        auto text_out = std::make_shared<std::string>();
        auto ascii = std::make_shared<bool>(false);
        sub->add_option("--episode", *episode, "episode snapshot file");
        sub->add_option("--memory-dir", *memory_dir, "memory snapshot directory");
        sub->add_option("--episode-id", *episode_id, "episode to pick from the memory");
        sub->add_option("--pgm-out", *pgm_out, "grayscale map output");
        sub->add_option("--text-out", *text_out, "structured map snapshot output");
        sub->add_flag("--ascii", *ascii, "P2 instead of P5");
        sub->callback([=, &exit_code] {
            exit_code = cmd_export_map(*episode, *memory_dir, *episode_id, *pgm_out,
                                       *text_out, *ascii);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfigError;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
    return exit_code;
}

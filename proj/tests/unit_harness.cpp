#include <doctest.h>

#include <filesystem>

#include "himm/harness.hpp"
#include "test_support.hpp"

using namespace himm;
namespace ts = test_support;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("harness");

namespace {

// Writes scene/script pairs for fresh generated scenes into dir and
// returns a suite referencing them by absolute path.
SuiteSpec make_suite(const ts::TempDir& dir, std::initializer_list<uint64_t> seeds) {
    SuiteSpec suite;
    for (uint64_t seed : seeds) {
        auto [scene, script] = generate_scene(seed);
        const std::string scene_path =
            dir.file("scene" + std::to_string(seed) + ".txt");
        const std::string script_path =
            dir.file("script" + std::to_string(seed) + ".txt");
        save_scene(scene, scene_path);
        save_script(script, script_path);
        suite.episodes.push_back({scene_path, script_path});
    }
    return suite;
}

} // namespace

TEST_CASE("config values apply and reject") {
    RunConfig cfg;
    apply_config_value(cfg, "resolution", "0.2");
    CHECK(cfg.agent.resolution == doctest::Approx(0.2));
    apply_config_value(cfg, "step_budget", "17");
    CHECK(cfg.agent.step_budget == 17);
    apply_config_value(cfg, "recall", "off");
    CHECK_FALSE(cfg.agent.recall_enabled);
    apply_config_value(cfg, "rules", "on");
    CHECK(cfg.agent.rules_enabled);
    apply_config_value(cfg, "seed", "42");
    CHECK(cfg.seed == 42);
    CHECK(cfg.agent.rng_seed == 42);
    apply_config_value(cfg, "gateway", "wire");
    CHECK(cfg.gateway == GatewayMode::Wire);
    apply_config_value(cfg, "api_key", "secret");
    CHECK(cfg.api_key == "secret");

    CHECK_THROWS_AS(apply_config_value(cfg, "resolution", "tiny"), ConfigError);
    CHECK_THROWS_AS(apply_config_value(cfg, "step_budget", "many"), ConfigError);
    CHECK_THROWS_AS(apply_config_value(cfg, "recall", "maybe"), ConfigError);
    CHECK_THROWS_AS(apply_config_value(cfg, "gateway", "carrier-pigeon"), ConfigError);
    CHECK_THROWS_AS(apply_config_value(cfg, "warp_factor", "9"), ConfigError);
}

TEST_CASE("config layering is weakest first") {
    ts::TempDir dir("hcfg");
    const std::string cfg_path = dir.file("run.json");
    ts::spit(cfg_path, R"({"resolution": 0.2, "seed": 5, "recall": false})");

    const RunConfig cfg = resolve_config(
        cfg_path, {{"seed", "9"}, {"chat_model", "m-env"}},
        {{"seed", "11"}, {"rules", "off"}});
    CHECK(cfg.agent.resolution == doctest::Approx(0.2)); // file only
    CHECK(cfg.seed == 11);                               // flag beats env beats file
    CHECK(cfg.chat_model == "m-env");                    // env only
    CHECK_FALSE(cfg.agent.recall_enabled);               // file only
    CHECK_FALSE(cfg.agent.rules_enabled);                // flag only

    const RunConfig defaults = resolve_config("", {}, {});
    CHECK(defaults.agent.resolution == doctest::Approx(AgentConfig{}.resolution));
    CHECK(defaults.gateway == GatewayMode::Mock);

    CHECK_THROWS_AS(resolve_config(dir.file("absent.json"), {}, {}), ConfigError);
    const std::string broken = dir.file("broken.json");
    ts::spit(broken, "{nope");
    CHECK_THROWS_AS(resolve_config(broken, {}, {}), ConfigError);
    const std::string arrays = dir.file("arrays.json");
    ts::spit(arrays, R"({"resolution": [1, 2]})");
    CHECK_THROWS_AS(resolve_config(arrays, {}, {}), ConfigError);
}

TEST_CASE("config fingerprints track presence, not secrets") {
    RunConfig a;
    const std::string fp_unset = config_fingerprint(a);
    a.api_key = "secret-one";
    const std::string fp_one = config_fingerprint(a);
    RunConfig b = a;
    b.api_key = "different-secret";
    CHECK(config_fingerprint(b) == fp_one); // value never enters the print
    CHECK(fp_unset != fp_one);              // presence does

    CHECK(render_config(a).find("secret-one") == std::string::npos);
    CHECK(render_config(a).find("api_key set") != std::string::npos);

    RunConfig c = a;
    c.agent.step_budget += 1;
    CHECK(config_fingerprint(c) != fp_one);
}

TEST_CASE("suite files round trip and resolve relative paths") {
    ts::TempDir dir("hsuite");
    auto [scene, script] = generate_scene(4);
    save_scene(scene, dir.file("scene.txt"));
    save_script(script, dir.file("script.txt"));

    SuiteSpec rel;
    rel.episodes.push_back({"scene.txt", "script.txt"});
    const std::string path = dir.file("suite.txt");
    save_suite(rel, path);
    const SuiteSpec back = load_suite(path);
    REQUIRE(back.episodes.size() == 1);
    CHECK(fs::path(back.episodes[0].scene_path).is_absolute());
    CHECK(fs::exists(back.episodes[0].scene_path));
    CHECK(fs::exists(back.episodes[0].script_path));

    CHECK_THROWS_AS(load_suite(dir.file("missing.txt")), IoError);
    const std::string odd = dir.file("odd.txt");
    ts::spit(odd, "not-a-suite v1\nend\n");
    CHECK_THROWS_AS(load_suite(odd), ValidationError);
    ts::spit(odd, "himm-suite v3\nend\n");
    CHECK_THROWS_AS(load_suite(odd), MigrationError);
    ts::spit(odd, "himm-suite v1\nepisode a b\n");
    CHECK_THROWS_AS(load_suite(odd), IntegrityError); // truncated
    ts::spit(odd, "himm-suite v1\nend\nepisode a b\n");
    CHECK_THROWS_AS(load_suite(odd), ValidationError); // content after end
}

TEST_CASE("aggregates are means over rows") {
    const SuiteAggregates empty = compute_aggregates({});
    CHECK_FALSE(empty.success_rate.has_value());
    CHECK_FALSE(empty.mean_spl.has_value());
    CHECK_FALSE(empty.mean_steps.has_value());
    CHECK_FALSE(empty.match_rate.has_value());

    std::vector<EpisodeResult> rows(2);
    rows[0].success = true;
    rows[0].judged_match = true;
    rows[0].spl = 0.8;
    rows[0].steps = 10;
    rows[1].success = false;
    rows[1].judged_match = false;
    rows[1].spl = 0.0;
    rows[1].steps = 30;
    const SuiteAggregates agg = compute_aggregates(rows);
    CHECK(*agg.success_rate == doctest::Approx(0.5));
    CHECK(*agg.mean_spl == doctest::Approx(0.4));
    CHECK(*agg.mean_steps == doctest::Approx(20.0));
    CHECK(*agg.match_rate == doctest::Approx(0.5));
}

TEST_CASE("suite results refuse mismatched aggregates") {
    ts::TempDir dir("hres");
    SuiteResult result;
    result.seed = 3;
    result.config_fingerprint = "cafecafecafecafe";
    EpisodeResult row;
    row.episode_id = "s000-alpha";
    row.answer = "in the far room";
    row.success = true;
    row.judged_match = true;
    row.steps = 12;
    row.path_len = 8.5;
    row.shortest_len = 7.25;
    row.spl = 0.85;
    row.final_distance = 0.4;
    result.episodes.push_back(row);
    EpisodeResult bad;
    bad.episode_id = "s001-beta";
    bad.aborted = true;
    bad.abort_reason = "scene file missing: a b c";
    result.episodes.push_back(bad);
    result.aggregates = compute_aggregates(result.episodes);

    const std::string path = dir.file("result.txt");
    save_suite_result(result, path);
    const SuiteResult back = load_suite_result(path);
    CHECK(back.seed == result.seed);
    CHECK(back.config_fingerprint == result.config_fingerprint);
    REQUIRE(back.episodes.size() == 2);
    CHECK(back.episodes[0].answer == row.answer);
    CHECK(back.episodes[0].spl == row.spl);
    CHECK(back.episodes[1].aborted);
    CHECK(back.episodes[1].abort_reason == bad.abort_reason);
    CHECK(*back.aggregates.mean_steps == *result.aggregates.mean_steps);

    // Saving a loaded result reproduces the bytes.
    const std::string path2 = dir.file("result2.txt");
    save_suite_result(back, path2);
    CHECK(ts::slurp(path) == ts::slurp(path2));

    SuiteResult doctored = back;
    doctored.aggregates.mean_spl = 0.123;
    CHECK_THROWS_AS(save_suite_result(doctored, dir.file("nope.txt")), ValidationError);

    std::string bytes = ts::slurp(path);
    bytes[bytes.size() / 2] ^= 1;
    ts::spit(path, bytes);
    CHECK_THROWS(load_suite_result(path));
}

TEST_CASE("suites run deterministically, sequential or parallel") {
    ts::TempDir dir("hrun");
    const SuiteSpec suite = make_suite(dir, {1, 2, 3});
    RunConfig cfg;
    cfg.agent.recall_enabled = false; // allows concurrency
    cfg.agent.rules_enabled = false;
    cfg.seed = 7;
    cfg.agent.rng_seed = 7;

    const SuiteResult seq = run_suite(suite, cfg, 1, nullptr, nullptr);
    const SuiteResult par = run_suite(suite, cfg, 3, nullptr, nullptr);
    REQUIRE(seq.episodes.size() == 3);
    for (const EpisodeResult& r : seq.episodes) CHECK_FALSE(r.aborted);

    const std::string p_seq = dir.file("seq.txt");
    const std::string p_par = dir.file("par.txt");
    save_suite_result(seq, p_seq);
    save_suite_result(par, p_par);
    CHECK(ts::slurp(p_seq) == ts::slurp(p_par));

    // Recall on: episodes share the store and land in it in suite order.
    RunConfig recall_cfg = cfg;
    recall_cfg.agent.recall_enabled = true;
    EpisodicStore store(384);
    const SuiteResult shared = run_suite(suite, recall_cfg, 4, &store, nullptr);
    CHECK(shared.episodes.size() == 3);
    CHECK(store.size() == 3);
    CHECK(store.episodes()[0].episode_id == shared.episodes[0].episode_id);

    const std::string table = render_suite_table(seq);
    CHECK(table.find(seq.episodes[0].episode_id) != std::string::npos);
    CHECK(table.find("aggregates: success_rate=") != std::string::npos);
    const std::string one = render_episode_result(seq.episodes[0]);
    CHECK(one.find("id " + seq.episodes[0].episode_id) != std::string::npos);
    CHECK(one.find("steps ") != std::string::npos);
}

TEST_CASE("distillation pass sweeps trace files") {
    ts::TempDir dir("hdistill");

    auto write_trace = [&](const std::string& name, const std::string& instruction) {
        EpisodeTrace trace;
        trace.log.episode_id = name;
        trace.log.instruction = instruction;
        for (int i = 0; i < 8; ++i) {
            LogEntry e;
            e.point.timestep = i;
            e.point.position = {double(i), (i % 2 == 0) ? 0.0 : 3.0};
            e.summary = "step";
            trace.log.entries.push_back(std::move(e));
        }
        trace.gt.waypoints = {{0, 0}, {10, 0}};
        trace.gt_answer = "by the window";
        save_trace(trace, dir.file(name + ".trace"));
    };
    write_trace("aa", "find the mop");
    write_trace("bb", "find the bucket");
    ts::spit(dir.file("notes.txt"), "ignored\n");

    // Only the first trace's instruction unlocks a valid workflow reply;
    // the second exhausts retries and counts as failed.
    ScriptedChatClient chat("garbage");
    chat.add_rule({"extract-pseudocode", "find the mop",
                   R"json({"variables": [{"name": "target", "description": "goal"}],
                           "functions": [], "body": ["if target then stop"]})json",
                   -1});
    chat.add_rule({"extract-rules", "",
                   R"json([{"form": "if_then", "key": "k", "value": "v",
                            "anchor": "target"}])json",
                   -1});
    MockEmbedder emb(384, 1);
    RuleStore store(384);
    ThresholdSchedule sched;
    const DistillSummary summary =
        build_semantic_memory(dir.path(), sched, chat, emb, store);
    CHECK(summary.traces == 2);
    CHECK(summary.distilled == 1);
    CHECK(summary.failed == 1);
    CHECK(summary.rules_added == 1);
    CHECK(store.size() == 1);
    CHECK(store.rules()[0].source_episode_id == "aa");

    CHECK_THROWS_AS(
        build_semantic_memory(dir.file("nowhere"), sched, chat, emb, store), IoError);
}

TEST_SUITE_END();

#include <doctest.h>

#include <cmath>

#include "himm/cognitive_controller.hpp"
#include "himm/simulator.hpp"
#include "test_support.hpp"

using namespace himm;

TEST_SUITE_BEGIN("controller");

namespace {

const CognitiveState kStates[] = {
    CognitiveState::Exploration,
    CognitiveState::TargetVerification,
    CognitiveState::TargetApproaching,
    CognitiveState::CheckReadyToAnswer,
};

// The adjudicator policy the loop tests run under: confirm candidates,
// take the first frontier, declare readiness, and answer on request.
ScriptedChatClient policy_client(const std::string& answer) {
    ScriptedChatClient chat("yes");
    chat.add_rule({"choose-frontier", "", "0", -1});
    chat.add_rule({"verify-target", "", "yes", -1});
    chat.add_rule({"ready-check", "", "yes", -1});
    chat.add_rule({"answer", "", answer, -1});
    return chat;
}

void check_machine_soundness(const EpisodeResult& res, int budget) {
    CHECK_FALSE(res.aborted);
    CHECK(res.steps <= budget);
    REQUIRE(!res.log.entries.empty());
    for (size_t i = 1; i < res.log.entries.size(); ++i)
        CHECK(is_legal_transition(res.log.entries[i - 1].point.state,
                                  res.log.entries[i].point.state));
    if (!res.answer.empty())
        CHECK(res.log.entries.back().point.state == CognitiveState::CheckReadyToAnswer);
}

} // namespace

TEST_CASE("state names round trip") {
    for (CognitiveState s : kStates) {
        const auto back = parse_cognitive_state(cognitive_state_name(s));
        REQUIRE(back.has_value());
        CHECK(*back == s);
    }
    CHECK_FALSE(parse_cognitive_state("Daydreaming").has_value());
}

TEST_CASE("transition is total and budget-dominated") {
    for (CognitiveState s : kStates) {
        for (int bits = 0; bits < 32; ++bits) {
            Signals sig;
            sig.target_candidate_found = bits & 1;
            sig.target_confirmed = bits & 2;
            sig.at_target = bits & 4;
            sig.ready_to_answer = bits & 8;
            sig.budget_exhausted = bits & 16;

            CognitiveState want;
            if (sig.budget_exhausted) {
                want = CognitiveState::CheckReadyToAnswer;
            } else {
                switch (s) {
                    case CognitiveState::Exploration:
                        want = sig.target_candidate_found
                                   ? CognitiveState::TargetVerification
                                   : CognitiveState::Exploration;
                        break;
                    case CognitiveState::TargetVerification:
                        want = sig.target_confirmed ? CognitiveState::TargetApproaching
                                                    : CognitiveState::Exploration;
                        break;
                    case CognitiveState::TargetApproaching:
                        want = sig.at_target ? CognitiveState::CheckReadyToAnswer
                                             : CognitiveState::TargetApproaching;
                        break;
                    case CognitiveState::CheckReadyToAnswer:
                        want = sig.ready_to_answer ? CognitiveState::CheckReadyToAnswer
                                                   : CognitiveState::Exploration;
                        break;
                }
            }
            CHECK(transition(s, sig) == want);
            CHECK(is_legal_transition(s, transition(s, sig)));
        }
    }
}

TEST_CASE("legal transition edge set") {
    auto legal = [](CognitiveState from, CognitiveState to) {
        using S = CognitiveState;
        if (to == S::CheckReadyToAnswer) return true; // budget override
        if (from == S::Exploration)
            return to == S::Exploration || to == S::TargetVerification;
        if (from == S::TargetVerification)
            return to == S::Exploration || to == S::TargetApproaching;
        if (from == S::TargetApproaching) return to == S::TargetApproaching;
        return to == S::Exploration; // CheckReadyToAnswer re-opens exploration
    };
    for (CognitiveState from : kStates)
        for (CognitiveState to : kStates)
            CHECK(is_legal_transition(from, to) == legal(from, to));
}

TEST_CASE("config validation rejects each bad field") {
    CHECK_NOTHROW(validate_config(AgentConfig{}));
    AgentConfig cfg;
    cfg.resolution = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.max_range = -1.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.k_retrieve = 0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.rule_top_k = 0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.step_budget = 0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.success_radius = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.min_unknown_area = 0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.d_min = -0.1;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    cfg = {};
    cfg.step_length = 0.0;
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
}

TEST_CASE("reference episode is sound and deterministic") {
    auto run_once = [](EpisodeResult* out, EpisodicStore* episodic) {
        auto [scene, script] = reference_scene();
        SyntheticEmbedder emb(default_vocabulary(), 64, 0);
        SimEnvironment env(scene, script, emb);
        ScriptedChatClient chat = policy_client(script.gt_answer);
        AgentConfig cfg;
        cfg.rng_seed = 0;
        const GoalSpec goal =
            make_goal(script.question, script.target_category, {}, {}, emb);
        *out = run_episode(cfg, goal, "ref-ep", env, chat, emb, episodic, nullptr);
    };

    EpisodeResult a;
    EpisodicStore store(64);
    run_once(&a, &store);
    check_machine_soundness(a, AgentConfig{}.step_budget);
    CHECK(!a.answer.empty());
    CHECK(a.judged_match);
    CHECK(a.success);
    CHECK(a.spl > 0.0);
    CHECK(a.spl <= 1.0);
    CHECK(a.path_len >= a.shortest_len * a.spl - 1e-9);

    // The finished episode landed in the store with both spaces filled.
    REQUIRE(store.size() == 1);
    CHECK(store.episodes()[0].episode_id == "ref-ep");
    CHECK(store.episodes()[0].semantic_space.size() > 0);
    CHECK(store.episodes()[0].physical_space.known_count() > 0);
    CHECK(store.episodes()[0].scene_tag == "three-rooms");

    EpisodeResult b;
    run_once(&b, nullptr);
    CHECK(b.steps == a.steps);
    CHECK(b.answer == a.answer);
    CHECK(b.path_len == a.path_len);
    CHECK(b.final_distance == a.final_distance);
    REQUIRE(b.log.entries.size() == a.log.entries.size());
    for (size_t i = 0; i < a.log.entries.size(); ++i)
        CHECK(b.log.entries[i].point.state == a.log.entries[i].point.state);
}

TEST_CASE("exhausted surroundings force the answer check early") {
    // A sealed 3 x 3 m room: once mapped there is nothing left to explore,
    // so the loop must fall onto the forced answer-check edge well before
    // the step budget runs out.
    SceneSpec scene;
    scene.name = "cell";
    scene.walls = {{{0, 0}, {3, 0}}, {{3, 0}, {3, 3}}, {{3, 3}, {0, 3}}, {{0, 3}, {0, 0}}};
    scene.objects = {{"crate", {2.2, 2.2, 0.3}, {0.3, 0.3, 0.3}, ""}};
    scene.spawns = {Pose::at(1.5, 1.5)};
    EpisodeScript script;
    script.scene_ref = "cell";
    script.question = "where is the crate";
    script.target_category = "crate";
    script.gt_answer = "in the corner";
    script.gt_trajectory.waypoints = {{1.5, 1.5}, {2.2, 2.2}};

    SyntheticEmbedder emb(default_vocabulary(), 64, 0);
    SimEnvironment env(scene, script, emb);
    ScriptedChatClient chat = policy_client(script.gt_answer);
    AgentConfig cfg;
    const GoalSpec goal = make_goal(script.question, script.target_category, {}, {}, emb);
    const EpisodeResult res =
        run_episode(cfg, goal, "cell-ep", env, chat, emb, nullptr, nullptr);

    check_machine_soundness(res, cfg.step_budget);
    CHECK(res.steps < cfg.step_budget);
    CHECK(!res.answer.empty());
}

TEST_SUITE_END();

#include <doctest.h>

#include <cmath>

#include "himm/simulator.hpp"
#include "test_support.hpp"

using namespace himm;
namespace ts = test_support;

TEST_SUITE_BEGIN("sim");

namespace {

// 12 x 10 room with a short divider at x = 8 spanning y in [4, 6].
SceneSpec test_room() {
    SceneSpec scene;
    scene.name = "test-room";
    scene.walls = {
        {{0, 0}, {12, 0}}, {{12, 0}, {12, 10}}, {{12, 10}, {0, 10}}, {{0, 10}, {0, 0}},
        {{8, 4}, {8, 6}},
    };
    scene.spawns = {Pose::at(5, 5)};
    return scene;
}

} // namespace

TEST_CASE("scene validation") {
    const std::vector<std::string> vocab = {"chair", "table"};
    SceneSpec good = test_room();
    good.objects.push_back({"chair", {2, 2, 0.4}, {0.3, 0.3, 0.4}, "room"});
    CHECK_NOTHROW(validate_scene(good, vocab));
    CHECK_NOTHROW(validate_scene(good, {})); // empty vocabulary skips categories

    SceneSpec diagonal = good;
    diagonal.walls.push_back({{1, 1}, {2, 3}});
    CHECK_THROWS_AS(validate_scene(diagonal, vocab), ValidationError);

    SceneSpec degenerate = good;
    degenerate.walls.push_back({{1, 1}, {1, 1}});
    CHECK_THROWS_AS(validate_scene(degenerate, vocab), ValidationError);

    SceneSpec no_spawn = good;
    no_spawn.spawns.clear();
    CHECK_THROWS_AS(validate_scene(no_spawn, vocab), ValidationError);

    SceneSpec outside = good;
    outside.objects.push_back({"table", {40, 2, 0.4}, {0.3, 0.3, 0.4}, ""});
    CHECK_THROWS_AS(validate_scene(outside, vocab), ValidationError);

    SceneSpec alien = good;
    alien.objects.push_back({"zeppelin", {3, 3, 0.4}, {0.3, 0.3, 0.4}, ""});
    CHECK_THROWS_AS(validate_scene(alien, vocab), ValidationError);
}

TEST_CASE("script validation against its scene") {
    auto [scene, script] = reference_scene();
    CHECK_NOTHROW(validate_scene(scene, default_vocabulary()));
    CHECK_NOTHROW(validate_script(script, scene));

    EpisodeScript missing = script;
    missing.target_category = "unicorn";
    CHECK_THROWS_AS(validate_script(missing, scene), ValidationError);

    EpisodeScript far_start = script;
    far_start.gt_trajectory.waypoints.front() =
        far_start.gt_trajectory.waypoints.front() + Vec2{2.5, 0};
    CHECK_THROWS_AS(validate_script(far_start, scene), ValidationError);

    EpisodeScript short_end = script;
    const Vec2 spawn = scene.spawns[0].position.xy();
    short_end.gt_trajectory.waypoints = {spawn, spawn + Vec2{0.4, 0}};
    CHECK_THROWS_AS(validate_script(short_end, scene), ValidationError);
}

TEST_CASE("observation respects range, fov, and occlusion") {
    SceneSpec scene = test_room();
    scene.objects = {
        {"visible_cat", {7, 5, 0.4}, {0.3, 0.3, 0.4}, ""},   // straight ahead
        {"side_cat", {5, 7, 0.4}, {0.3, 0.3, 0.4}, ""},      // 90 degrees off axis
        {"hidden_cat", {9, 5, 0.4}, {0.3, 0.3, 0.4}, ""},    // behind the divider
        {"distant_cat", {11.5, 5, 0.4}, {0.3, 0.3, 0.4}, ""} // past max range
    };
    SyntheticEmbedder emb(default_vocabulary(), 64, 3);
    SensorParams params;
    params.fov = kPi / 2.0;
    params.rays = 31;
    params.max_range = 5.0;
    const Pose pose = Pose::at(5, 5, 0.0);

    const auto [obs, scan] = observe(scene, pose, emb, params);
    REQUIRE(obs.regions.size() == 1);
    CHECK(obs.regions[0].label == "visible_cat");
    CHECK(obs.regions[0].box3d.center.x == doctest::Approx(7.0));

    // One region: the global embedding is that view, close to the base.
    CHECK(ts::cosd(obs.global_embedding, emb.base_vector("visible_cat")) > 0.9);
    CHECK(obs.image_ref == "img://test-room/5.000_5.000_0.000");

    // The center ray points down +x and stops on the divider 3 m out.
    REQUIRE(scan.size() == 31);
    const ScanRay& mid = scan[15];
    CHECK(mid.bearing == doctest::Approx(0.0));
    CHECK(mid.hit);
    CHECK(mid.range == doctest::Approx(3.0).epsilon(1e-9));
    // The 45-degree edge ray misses the divider and runs out of range.
    CHECK_FALSE(scan.back().hit);
    CHECK(scan.back().range == doctest::Approx(params.max_range));

    // Re-observing is bit-identical.
    const auto [obs2, scan2] = observe(scene, pose, emb, params);
    CHECK(obs2.global_embedding == obs.global_embedding);
    CHECK(obs2.regions[0].embedding == obs.regions[0].embedding);

    // Nothing visible: the global embedding falls back to the area vector.
    const auto [empty_obs, empty_scan] = observe(scene, Pose::at(5, 5, kPi), emb, params);
    CHECK(empty_obs.regions.empty());
    CHECK(empty_obs.global_embedding == emb.area_vector(scene.name));

    CHECK_THROWS_AS(observe(scene, Pose::at(-3, 5), emb, params), OutOfBoundsError);
    SensorParams bad = params;
    bad.rays = 0;
    CHECK_THROWS_AS(observe(scene, pose, emb, bad), ConfigError);
}

TEST_CASE("movement truncates at the first wall") {
    const SceneSpec scene = test_room();
    const Pose start = Pose::at(5, 5, 0.3);

    const MoveOutcome free_move = execute_move(scene, start, {6, 6});
    CHECK_FALSE(free_move.collided);
    CHECK(free_move.pose.position.x == doctest::Approx(6.0));
    CHECK(free_move.pose.position.y == doctest::Approx(6.0));
    CHECK(free_move.path_delta == doctest::Approx(std::sqrt(2.0)));
    CHECK(free_move.pose.yaw == doctest::Approx(kPi / 4.0));

    const MoveOutcome blocked = execute_move(scene, start, {9, 5});
    CHECK(blocked.collided);
    CHECK(blocked.pose.position.x == doctest::Approx(8.0 - 0.02).epsilon(1e-9));
    CHECK(blocked.pose.position.y == doctest::Approx(5.0));
    CHECK(blocked.path_delta == doctest::Approx(3.0 - 0.02).epsilon(1e-9));
    CHECK(blocked.pose.yaw == doctest::Approx(0.0));

    const MoveOutcome still = execute_move(scene, start, {5, 5});
    CHECK_FALSE(still.collided);
    CHECK(still.path_delta == 0.0);
    CHECK(still.pose.yaw == doctest::Approx(0.3)); // zero move keeps yaw
}

TEST_CASE("answers judge by containment or by the judge client") {
    EpisodeScript script;
    script.question = "where is the kettle";
    script.gt_answer = "in the far room";

    CHECK(judge_answer(script, "The kettle is In the FAR, room.", nullptr).matched);
    CHECK(judge_answer(script, "in the far room", nullptr).matched);
    CHECK_FALSE(judge_answer(script, "somewhere else entirely", nullptr).matched);
    CHECK_FALSE(judge_answer(script, "", nullptr).matched);
    CHECK_FALSE(judge_answer(script, "", nullptr).judge_error);

    ScriptedChatClient yes("yes");
    CHECK(judge_answer(script, "unrelated words", &yes).matched);
    ScriptedChatClient no("no");
    CHECK_FALSE(judge_answer(script, "in the far room", &no).matched);

    FailingChatClient failing;
    const JudgeOutcome err = judge_answer(script, "in the far room", &failing);
    CHECK_FALSE(err.matched);
    CHECK(err.judge_error);
}

TEST_CASE("rasterized scenes support ground-truth planning") {
    const SceneSpec scene = test_room();
    const OccupancyGrid grid = rasterize_scene(scene, 0.1);

    // Wall cells occupied, interior free, no unknown anywhere.
    CHECK(grid.at(grid.world_to_cell({6.0, 0.0})) == CellState::Occupied);
    CHECK(grid.at(grid.world_to_cell({8.0, 5.0})) == CellState::Occupied);
    CHECK(grid.at(grid.world_to_cell({5.0, 5.0})) == CellState::Free);
    CHECK(grid.known_count() == size_t(grid.width()) * size_t(grid.height()));

    // Open-room route: close to the straight segment.
    const double open = gt_shortest_length(scene, {2, 2}, {6, 8});
    const double direct = distance(Vec2{2, 2}, Vec2{6, 8});
    CHECK(open >= direct - 1e-9);
    CHECK(open <= 1.1 * direct + 0.5);

    // Route past the divider has to detour around an end.
    const double detour = gt_shortest_length(scene, {7, 5}, {9, 5});
    CHECK(detour > 2.4);
    CHECK(detour < 6.0);
}

TEST_CASE("generated scenes are valid and deterministic") {
    for (uint64_t seed : {1ull, 2ull, 3ull, 7ull, 11ull}) {
        auto [scene, script] = generate_scene(seed);
        CHECK_NOTHROW(validate_scene(scene, default_vocabulary()));
        CHECK_NOTHROW(validate_script(script, scene));

        auto [scene2, script2] = generate_scene(seed);
        CHECK(scene2.walls.size() == scene.walls.size());
        CHECK(scene2.name == scene.name);
        CHECK(script2.question == script.question);
        CHECK(script2.gt_trajectory.waypoints.size() ==
              script.gt_trajectory.waypoints.size());
    }
    auto [a, sa] = generate_scene(1);
    auto [b, sb] = generate_scene(2);
    CHECK(a.name != b.name);
}

TEST_CASE("environment runs a scripted episode consistently") {
    auto [scene, script] = reference_scene();
    SyntheticEmbedder emb(default_vocabulary(), 64, 0);
    SimEnvironment env(scene, script, emb);

    const Pose spawn = env.current_pose();
    CHECK(spawn.position.xy().x == doctest::Approx(scene.spawns[0].position.x));
    CHECK(env.question() == script.question);
    CHECK(env.scene_tag() == scene.name);
    CHECK_FALSE(env.is_navigation_task());
    CHECK(env.gt_shortest_path_length() > 0.0);

    const auto [obs, scan] = env.observe();
    CHECK(scan.size() > 0);

    const MoveOutcome out = env.move_to(spawn.position.xy() + Vec2{0.5, 0.0});
    CHECK(out.path_delta > 0.0);
    CHECK(env.current_pose().position.x ==
          doctest::Approx(spawn.position.x + out.path_delta * 1.0).epsilon(1e-6));

    CHECK(env.judge(script.gt_answer).matched);
}

TEST_CASE("scene, script, and vocabulary files round trip") {
    ts::TempDir dir("simio");

    auto [scene, script] = generate_scene(5);
    const std::string scene_path = dir.file("scene.txt");
    save_scene(scene, scene_path);
    const SceneSpec back = load_scene(scene_path);
    const std::string scene_path2 = dir.file("scene2.txt");
    save_scene(back, scene_path2);
    CHECK(ts::slurp(scene_path) == ts::slurp(scene_path2));
    CHECK(back.walls.size() == scene.walls.size());
    CHECK(back.name == scene.name);

    const std::string script_path = dir.file("script.txt");
    save_script(script, script_path);
    const EpisodeScript sback = load_script(script_path);
    const std::string script_path2 = dir.file("script2.txt");
    save_script(sback, script_path2);
    CHECK(ts::slurp(script_path) == ts::slurp(script_path2));
    CHECK(sback.question == script.question);
    CHECK(sback.modality == script.modality);
    CHECK(sback.gt_trajectory.waypoints.size() == script.gt_trajectory.waypoints.size());

    const std::string vocab_path = dir.file("vocab.txt");
    save_vocabulary(default_vocabulary(), vocab_path);
    CHECK(load_vocabulary(vocab_path) == default_vocabulary());

    CHECK_THROWS_AS(load_scene(dir.file("missing.txt")), IoError);

    // Wrong version line.
    std::string text = ts::slurp(scene_path);
    const size_t v = text.find("v1");
    REQUIRE(v != std::string::npos);
    std::string bumped = text;
    bumped.replace(v, 2, "v9");
    const std::string bad_path = dir.file("bad.txt");
    ts::spit(bad_path, bumped);
    CHECK_THROWS_AS(load_scene(bad_path), MigrationError);

    // Truncated payload.
    ts::spit(bad_path, text.substr(0, text.size() / 2));
    CHECK_THROWS(load_scene(bad_path));

    ts::spit(bad_path, "not a scene at all\n");
    CHECK_THROWS(load_scene(bad_path));
}

TEST_SUITE_END();

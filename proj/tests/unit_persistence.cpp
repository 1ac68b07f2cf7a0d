#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "himm/persistence.hpp"
#include "himm/physical_space.hpp"
#include "test_support.hpp"

using namespace himm;
namespace ts = test_support;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("persistence");

namespace {

Observation sample_obs(const std::string& id, uint64_t tag, size_t dim) {
    Observation o;
    o.id = id;
    o.episode_id = "ep-" + id;
    o.timestep = int(tag % 97);
    o.pose = Pose::at(0.25 * double(tag % 11), -0.5 * double(tag % 7),
                      0.1 * double(tag % 5));
    o.global_embedding = hash_to_unit_vector(3, "g" + std::to_string(tag), dim);
    RegionEntry r;
    r.embedding = hash_to_unit_vector(3, "r" + std::to_string(tag), dim);
    r.box3d.center = {1.5, -2.25, 0.5};
    r.box3d.extents = {0.4, 0.3, 0.8};
    r.label = tag % 2 ? "lamp with shade" : "";
    o.regions.push_back(std::move(r));
    o.image_ref = "img://scene/" + id;
    return o;
}

SemanticStore sample_semantic(size_t dim, int count, uint64_t salt) {
    SemanticStore store(dim);
    for (int i = 0; i < count; ++i)
        store.insert(sample_obs("obs" + std::to_string(i), salt * 100 + uint64_t(i), dim));
    return store;
}

OccupancyGrid sample_grid() {
    OccupancyGrid g(0.25, {-1.0, 2.0}, 7, 5);
    g.set({0, 0}, CellState::Free);
    g.set({1, 0}, CellState::Free);
    g.set({2, 0}, CellState::Occupied);
    g.set({6, 4}, CellState::Free);
    g.set({3, 2}, CellState::Occupied);
    return g;
}

EpisodeRecord sample_record(const std::string& id, size_t dim, uint64_t salt) {
    EpisodeRecord rec;
    rec.episode_id = id;
    rec.semantic_space = sample_semantic(dim, 3, salt);
    rec.physical_space = sample_grid();
    rec.created_at = int64_t(salt) + 10;
    rec.scene_tag = "scene-" + id;
    return rec;
}

bool same_observation(const Observation& a, const Observation& b) {
    if (a.id != b.id || a.episode_id != b.episode_id || a.timestep != b.timestep)
        return false;
    if (a.global_embedding != b.global_embedding) return false;
    if (a.image_ref != b.image_ref) return false;
    if (a.regions.size() != b.regions.size()) return false;
    for (size_t i = 0; i < a.regions.size(); ++i) {
        if (a.regions[i].embedding != b.regions[i].embedding) return false;
        if (a.regions[i].label != b.regions[i].label) return false;
    }
    return a.pose.position.x == b.pose.position.x && a.pose.yaw == b.pose.yaw;
}

} // namespace

TEST_CASE("cell runs encode canonically") {
    const OccupancyGrid g = sample_grid();
    const std::string rle = encode_cells_rle(g);
    const std::vector<uint8_t> cells =
        decode_cells_rle(rle, size_t(g.width()) * size_t(g.height()));
    CHECK(cells == g.raw());

    std::mt19937_64 rng(11);
    for (int iter = 0; iter < 50; ++iter) {
        const OccupancyGrid r = ts::random_grid(rng, 24);
        const std::string enc = encode_cells_rle(r);
        CHECK(decode_cells_rle(enc, r.raw().size()) == r.raw());
    }

    CHECK_THROWS_AS(decode_cells_rle("3U", 4), IntegrityError);  // short
    CHECK_THROWS_AS(decode_cells_rle("5U", 4), IntegrityError);  // long
    CHECK_THROWS_AS(decode_cells_rle("4X", 4), IntegrityError);  // bad letter
    CHECK_THROWS_AS(decode_cells_rle("U", 1), IntegrityError);   // missing count
    CHECK_THROWS_AS(decode_cells_rle("", 1), IntegrityError);
}

TEST_CASE("semantic stores round trip byte for byte") {
    ts::TempDir dir("persem");
    const SemanticStore store = sample_semantic(16, 5, 1);

    const std::string p1 = dir.file("sem1.txt");
    save_semantic(store, p1);
    const SemanticStore back = load_semantic(p1);
    REQUIRE(back.size() == store.size());
    CHECK(back.dim() == store.dim());
    for (size_t i = 0; i < store.size(); ++i)
        CHECK(same_observation(back.at(i), store.at(i)));

    const std::string p2 = dir.file("sem2.txt");
    save_semantic(back, p2);
    CHECK(ts::slurp(p1) == ts::slurp(p2));

    // Retrieval is unchanged by a round trip.
    const auto q = hash_to_unit_vector(9, "probe", 16);
    const auto before = store.query_regions(q, 4);
    const auto after = back.query_regions(q, 4);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].observation_id == after[i].observation_id);
        CHECK(before[i].similarity == after[i].similarity);
    }
}

TEST_CASE("rule stores round trip byte for byte") {
    ts::TempDir dir("perrule");
    RuleStore store(16);
    for (int i = 0; i < 4; ++i) {
        Rule r;
        r.form = RuleForm(i % 3);
        r.key = "when the hallway narrows " + std::to_string(i);
        r.value = "slow to half stride";
        r.anchor = "stride_limit";
        r.source_episode_id = "ep" + std::to_string(i);
        r.question_embedding = hash_to_unit_vector(5, "q" + std::to_string(i), 16);
        store.add_rule(std::move(r));
    }
    const std::string p1 = dir.file("rules1.txt");
    save_rules(store, p1);
    const RuleStore back = load_rules(p1);
    REQUIRE(back.size() == store.size());
    for (size_t i = 0; i < store.size(); ++i) {
        CHECK(back.rules()[i].form == store.rules()[i].form);
        CHECK(back.rules()[i].key == store.rules()[i].key);
        CHECK(back.rules()[i].value == store.rules()[i].value);
        CHECK(back.rules()[i].anchor == store.rules()[i].anchor);
        CHECK(back.rules()[i].question_embedding == store.rules()[i].question_embedding);
    }
    const std::string p2 = dir.file("rules2.txt");
    save_rules(back, p2);
    CHECK(ts::slurp(p1) == ts::slurp(p2));
}

TEST_CASE("episode records and directories round trip") {
    ts::TempDir dir("perep");
    const EpisodeRecord rec = sample_record("alpha", 16, 2);

    const std::string p1 = dir.file("ep1.txt");
    save_episode_record(rec, p1);
    const EpisodeRecord back = load_episode_record(p1);
    CHECK(back.episode_id == rec.episode_id);
    CHECK(back.created_at == rec.created_at);
    CHECK(back.scene_tag == rec.scene_tag);
    CHECK(back.physical_space.raw() == rec.physical_space.raw());
    CHECK(back.physical_space.origin().x == rec.physical_space.origin().x);
    CHECK(back.semantic_space.size() == rec.semantic_space.size());
    const std::string p2 = dir.file("ep2.txt");
    save_episode_record(back, p2);
    CHECK(ts::slurp(p1) == ts::slurp(p2));

    EpisodicStore store(16);
    store.add_episode(sample_record("alpha", 16, 2));
    store.add_episode(sample_record("beta", 16, 3));
    const std::string d1 = dir.file("store1");
    save_episodic(store, d1);
    const EpisodicStore sback = load_episodic(d1);
    REQUIRE(sback.size() == 2);
    CHECK(sback.episodes()[0].episode_id == "alpha");
    CHECK(sback.episodes()[1].episode_id == "beta");

    // Cross-episode retrieval gives identical results before and after.
    Observation probe = sample_obs("probe", 77, 16);
    probe.episode_id = "elsewhere";
    const auto before = retrieve_similar(store, probe, 5);
    const auto after = retrieve_similar(sback, probe, 5);
    REQUIRE(before.size() == after.size());
    for (size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].episode_id == after[i].episode_id);
        CHECK(before[i].observation_id == after[i].observation_id);
        CHECK(before[i].similarity == after[i].similarity);
    }

    const std::string d2 = dir.file("store2");
    save_episodic(sback, d2);
    for (const auto& entry : fs::directory_iterator(d1)) {
        const std::string name = entry.path().filename().string();
        CHECK(ts::slurp(entry.path().string()) == ts::slurp(d2 + "/" + name));
    }
}

TEST_CASE("memory snapshots verify checksums") {
    ts::TempDir dir("permem");
    EpisodicStore episodic(16);
    episodic.add_episode(sample_record("alpha", 16, 2));
    episodic.add_episode(sample_record("beta", 16, 3));
    RuleStore rules(16);
    Rule r;
    r.key = "k";
    r.value = "v";
    r.anchor = "a";
    r.question_embedding = hash_to_unit_vector(5, "q", 16);
    rules.add_rule(std::move(r));

    const std::string d1 = dir.file("mem1");
    const std::string manifest = snapshot_memory(episodic, rules, d1);
    CHECK(fs::exists(manifest));

    MemoryStores loaded = load_memory(d1);
    CHECK(loaded.episodic.size() == 2);
    CHECK(loaded.rules.size() == 1);

    // Save -> load -> save reproduces every file byte for byte.
    const std::string d2 = dir.file("mem2");
    snapshot_memory(loaded.episodic, loaded.rules, d2);
    size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(d1)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel = fs::relative(entry.path(), d1).string();
        CHECK(ts::slurp(entry.path().string()) == ts::slurp(d2 + "/" + rel));
        ++compared;
    }
    CHECK(compared >= 4); // manifest, rules, index, two episodes

    // A flipped byte inside any store file must be caught by the manifest.
    std::string victim;
    for (const auto& entry : fs::recursive_directory_iterator(d1))
        if (entry.is_regular_file() &&
            entry.path().filename().string().find("manifest") == std::string::npos &&
            entry.path().filename().string().find("episode") != std::string::npos)
            victim = entry.path().string();
    REQUIRE(!victim.empty());
    std::string bytes = ts::slurp(victim);
    bytes[bytes.size() / 2] = bytes[bytes.size() / 2] == 'x' ? 'y' : 'x';
    ts::spit(victim, bytes);
    CHECK_THROWS_AS(load_memory(d1), IntegrityError);

    CHECK_THROWS_AS(load_memory(dir.file("nowhere")), IoError);
}

TEST_CASE("occupancy maps export as portable graymaps") {
    ts::TempDir dir("perpgm");
    const OccupancyGrid g = sample_grid();

    const std::string ascii_path = dir.file("map.p2.pgm");
    save_map_pgm(g, ascii_path, false);
    std::ifstream in(ascii_path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    CHECK(magic == "P2");
    CHECK(w == g.width());
    CHECK(h == g.height());
    CHECK(maxv == 255);
    std::vector<int> pix(size_t(w) * size_t(h));
    for (int& v : pix) in >> v;
    REQUIRE(in.good());
    // Top image row is the highest-y grid row.
    auto pixel = [&](int gx, int gy) { return pix[size_t(h - 1 - gy) * w + gx]; };
    CHECK(pixel(0, 0) == 255); // Free
    CHECK(pixel(2, 0) == 0);   // Occupied
    CHECK(pixel(3, 0) == 128); // Unknown
    CHECK(pixel(6, 4) == 255);
    CHECK(pixel(3, 2) == 0);

    const std::string bin_path = dir.file("map.p5.pgm");
    save_map_pgm(g, bin_path, true);
    const std::string raw = ts::slurp(bin_path);
    CHECK(raw.substr(0, 2) == "P5");
    const size_t pixels = size_t(w) * size_t(h);
    REQUIRE(raw.size() >= pixels);
    const std::string tail = raw.substr(raw.size() - pixels);
    for (int gy = 0; gy < h; ++gy)
        for (int gx = 0; gx < w; ++gx)
            CHECK(int(uint8_t(tail[size_t(h - 1 - gy) * w + gx])) == pixel(gx, gy));
}

TEST_CASE("annotated maps round trip") {
    ts::TempDir dir("perann");
    OccupancyGrid g(0.1, {0, 0}, 12, 12);
    for (int y = 2; y < 9; ++y)
        for (int x = 2; x < 9; ++x) g.set({x, y}, CellState::Free);

    const Pose agent = Pose::at(0.55, 0.45, 0.25);
    const std::vector<Pose> landmarks = {Pose::at(0.35, 0.35), Pose::at(0.75, 0.65)};
    AnnotatedExplorationMap map = render_retrieved_poses(
        g, landmarks, agent, extract_frontiers(g, 4));
    REQUIRE(!map.frontiers.empty());

    const std::string p1 = dir.file("map1.txt");
    save_annotated_map(map, p1);
    const AnnotatedExplorationMap back = load_annotated_map(p1);
    CHECK(back.grid.raw() == map.grid.raw());
    CHECK(back.retrieved_poses.size() == map.retrieved_poses.size());
    CHECK(back.agent_pose.position.x == map.agent_pose.position.x);
    REQUIRE(back.frontiers.size() == map.frontiers.size());
    for (size_t i = 0; i < map.frontiers.size(); ++i) {
        CHECK(back.frontiers[i].cells == map.frontiers[i].cells);
        CHECK(back.frontiers[i].size == map.frontiers[i].size);
    }
    const std::string p2 = dir.file("map2.txt");
    save_annotated_map(back, p2);
    CHECK(ts::slurp(p1) == ts::slurp(p2));
}

TEST_CASE("traces round trip and refuse corrupt envelopes") {
    ts::TempDir dir("pertrace");
    EpisodeTrace trace;
    trace.log.episode_id = "ep-9";
    trace.log.instruction = "find the blue bin";
    for (int i = 0; i < 4; ++i) {
        LogEntry e;
        e.point.timestep = i;
        e.point.position = {double(i), 0.5 * double(i)};
        e.point.state = i == 3 ? CognitiveState::CheckReadyToAnswer
                               : CognitiveState::Exploration;
        e.point.image_ref = "img://x/" + std::to_string(i);
        e.summary = "entry " + std::to_string(i);
        trace.log.entries.push_back(std::move(e));
    }
    trace.gt.waypoints = {{0, 0}, {3, 1.5}};
    trace.gt_answer = "by the stairs";

    const std::string p1 = dir.file("trace1.txt");
    save_trace(trace, p1);
    const EpisodeTrace back = load_trace(p1);
    CHECK(back.log.episode_id == trace.log.episode_id);
    CHECK(back.log.instruction == trace.log.instruction);
    REQUIRE(back.log.entries.size() == trace.log.entries.size());
    for (size_t i = 0; i < trace.log.entries.size(); ++i) {
        CHECK(back.log.entries[i].point.state == trace.log.entries[i].point.state);
        CHECK(back.log.entries[i].summary == trace.log.entries[i].summary);
    }
    CHECK(back.gt.waypoints.size() == trace.gt.waypoints.size());
    CHECK(back.gt_answer == trace.gt_answer);
    const std::string p2 = dir.file("trace2.txt");
    save_trace(back, p2);
    CHECK(ts::slurp(p1) == ts::slurp(p2));

    // Truncation breaks the checksum envelope.
    const std::string full = ts::slurp(p1);
    const std::string cut_path = dir.file("cut.txt");
    ts::spit(cut_path, full.substr(0, full.size() * 2 / 3));
    CHECK_THROWS_AS(load_trace(cut_path), IntegrityError);

    // Foreign versions are refused up front.
    std::string bumped = full;
    const size_t v = bumped.find("v1");
    REQUIRE(v != std::string::npos);
    bumped.replace(v, 2, "v7");
    const std::string bumped_path = dir.file("bumped.txt");
    ts::spit(bumped_path, bumped);
    CHECK_THROWS_AS(load_trace(bumped_path), MigrationError);

    CHECK_THROWS_AS(load_trace(dir.file("absent.txt")), IoError);
}

TEST_SUITE_END();

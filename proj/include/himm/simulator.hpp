#pragma once

// Deterministic 2D stand-in for a real embodied environment: axis-aligned
// wall scenes, ray-cast depth scans, synthetic category embeddings, and
// scripted episodes with ground-truth answers and trajectories.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "himm/cognitive_controller.hpp"
#include "himm/semantic_memory.hpp"

namespace himm {

struct Wall {
    Vec2 a;
    Vec2 b; // axis-aligned: a.x == b.x or a.y == b.y
};

struct SceneObject {
    std::string category;
    Vec3 position;
    Vec3 extents;
    std::string area_tag;
};

struct SceneSpec {
    std::string name;
    std::vector<Wall> walls;
    std::vector<SceneObject> objects;
    std::vector<Pose> spawns;
    uint64_t rng_seed = 0;
};

enum class QuestionModality { Category, Description, Image };

const char* modality_name(QuestionModality m);

struct EpisodeScript {
    std::string scene_ref;
    std::string question;
    std::string target_category;
    std::string gt_answer;
    GroundTruthTrajectory gt_trajectory;
    QuestionModality modality = QuestionModality::Description;
};

// Axis-aligned bounding box over all wall endpoints.
std::pair<Vec2, Vec2> scene_bounds(const SceneSpec& scene);

// Structural checks: axis-aligned non-degenerate walls, at least one
// spawn, objects inside the scene bounds, categories drawn from the
// vocabulary when one is given. Throws ValidationError.
void validate_scene(const SceneSpec& scene, const std::vector<std::string>& vocabulary);

// Script checks against its scene: the target category exists, the
// trajectory starts at a spawn, ends within 1 m of the target, and
// crosses no wall. Throws ValidationError.
void validate_script(const EpisodeScript& script, const SceneSpec& scene);

// Position of the script's target: the object of the target category
// nearest to the trajectory's final waypoint.
Vec2 target_position(const EpisodeScript& script, const SceneSpec& scene);

// Category embeddings: a fixed seeded base unit vector per vocabulary
// entry, plus per-view noise of scale sigma re-normalized onto the
// sphere. Views of one category stay close (cosine well above 0.9 at
// sigma 0.05); distinct categories stay near-orthogonal at dim 384.
class SyntheticEmbedder : public Embedder {
public:
    explicit SyntheticEmbedder(std::vector<std::string> vocabulary, size_t dim = 384,
                               uint64_t seed = 0, double sigma = 0.05);

    size_t dim() const override { return dim_; }
    double sigma() const { return sigma_; }
    const std::vector<std::string>& vocabulary() const { return vocab_; }

    // Vocabulary text embeds to its exact base vector, anything else to a
    // deterministic hashed vector. Empty text throws ValidationError.
    std::vector<float> embed(const std::string& text) override;

    std::vector<float> base_vector(const std::string& category) const;
    std::vector<float> view_embedding(const std::string& category, const Pose& pose) const;
    std::vector<float> area_vector(const std::string& scene_name) const;

private:
    size_t dim_;
    uint64_t seed_;
    double sigma_;
    std::vector<std::string> vocab_;
};

struct SensorParams {
    double fov = kPi / 2.0; // radians
    int rays = 61;
    double max_range = kDefaultMaxRange; // meters
};

// Posed sensing: a wall-limited ray fan plus one RegionEntry per visible
// (in-fov, in-range, unoccluded) object. The global embedding is the
// normalized mean of region embeddings, or the scene-area vector when
// nothing is visible. The observation's id, episode and timestep are
// left for the caller. Throws OutOfBoundsError when the pose is outside
// the scene bounds.
std::pair<Observation, DepthScan> observe(const SceneSpec& scene, const Pose& pose,
                                          const SyntheticEmbedder& embedder,
                                          const SensorParams& params = {});

// Straight-line motion toward the waypoint, truncated just short of the
// first wall hit (collision flagged, never an error). Yaw turns to the
// motion direction; zero-length moves keep it.
MoveOutcome execute_move(const SceneSpec& scene, const Pose& from, Vec2 waypoint);

// Answer matching. With a judge client: schema-constrained yes/no,
// failures reported as unmatched with the error flag. Without one:
// case/punctuation-insensitive containment of the reference answer.
JudgeOutcome judge_answer(const EpisodeScript& script, const std::string& answer,
                          ChatClient* judge);

// Rasterizes walls onto a fully-known grid (Free everywhere inside the
// bounds, Occupied along walls) for ground-truth planning.
OccupancyGrid rasterize_scene(const SceneSpec& scene,
                              double resolution = kDefaultResolution);

// True shortest route start -> target over the rasterized scene, meters.
// Falls back to the straight-line distance when planning fails.
double gt_shortest_length(const SceneSpec& scene, Vec2 start, Vec2 target,
                          double resolution = kDefaultResolution);

// One scripted episode in one scene. Owns the agent's true pose.
class SimEnvironment : public Environment {
public:
    SimEnvironment(SceneSpec scene, EpisodeScript script,
                   const SyntheticEmbedder& embedder, ChatClient* judge = nullptr,
                   SensorParams params = {});

    Pose current_pose() const override { return pose_; }
    std::pair<Observation, DepthScan> observe() override;
    MoveOutcome move_to(Vec2 waypoint) override;
    std::string question() const override { return script_.question; }
    std::string scene_tag() const override { return scene_.name; }
    Vec2 target_position() const override { return target_; }
    double gt_shortest_path_length() const override { return shortest_; }
    bool is_navigation_task() const override {
        return script_.modality == QuestionModality::Category;
    }
    JudgeOutcome judge(const std::string& answer) override;

    const SceneSpec& scene() const { return scene_; }
    const EpisodeScript& script() const { return script_; }
    bool collided() const { return collided_; }

private:
    SceneSpec scene_;
    EpisodeScript script_;
    const SyntheticEmbedder& embedder_;
    ChatClient* judge_;
    SensorParams params_;
    Pose pose_;
    Vec2 target_;
    double shortest_ = 0.0;
    bool collided_ = false;
};

// Scene, script, and vocabulary files (versioned structured text, see
// docs/formats.md). Loaders throw MigrationError on version mismatch and
// IoError / ValidationError on malformed content.
void save_scene(const SceneSpec& scene, const std::string& path);
SceneSpec load_scene(const std::string& path);
void save_script(const EpisodeScript& script, const std::string& path);
EpisodeScript load_script(const std::string& path);
void save_vocabulary(const std::vector<std::string>& vocab, const std::string& path);
std::vector<std::string> load_vocabulary(const std::string& path);

// The built-in category list scenes are generated from.
const std::vector<std::string>& default_vocabulary();

// Deterministic multi-room scene + matching script from a seed. Rooms in
// a row joined by door gaps; the target sits in the far room.
std::pair<SceneSpec, EpisodeScript> generate_scene(uint64_t seed);

// The fixed three-room scene used by the reference episodes and docs.
std::pair<SceneSpec, EpisodeScript> reference_scene();

} // namespace himm

#pragma once

// The agent loop: a four-state machine that sequences exploration,
// candidate verification, approach, and answering, wiring the spatial
// memory, the cross-episode stores, and the adjudicator together one
// step at a time.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "himm/cognitive_state.hpp"
#include "himm/episodic_memory.hpp"
#include "himm/physical_space.hpp"
#include "himm/semantic_memory.hpp"

namespace himm {

struct Signals {
    bool target_candidate_found = false;
    bool target_confirmed = false;
    bool at_target = false;
    bool ready_to_answer = false;
    bool budget_exhausted = false;
};

// Next state under the legal edge set. Total: any unlisted combination
// keeps the current state. Budget exhaustion overrides everything.
CognitiveState transition(CognitiveState state, const Signals& signals);

// True when consecutive log states (from -> to) can occur, including the
// forced budget edge into CheckReadyToAnswer.
bool is_legal_transition(CognitiveState from, CognitiveState to);

struct AgentConfig {
    double resolution = kDefaultResolution; // meters per map cell
    double max_range = kDefaultMaxRange;    // mapping range, meters
    double d_min = kDefaultDMin;            // landmark pruning radius, meters
    int min_unknown_area = kDefaultMinUnknownArea;
    size_t k_retrieve = kDefaultKRetrieve;
    size_t k_match = kDefaultKMatch;
    size_t rule_top_k = 4;
    int step_budget = 50;
    double success_radius = 1.0;      // meters
    double candidate_trigger = 0.75;  // cosine floor raising verification
    double step_length = 1.0;         // per-step travel cap, meters
    bool recall_enabled = true;
    bool rules_enabled = true;
    uint64_t rng_seed = 0;
};

// Throws ConfigError on nonpositive counts, budget, or radii.
void validate_config(const AgentConfig& cfg);

struct Action {
    enum class Kind { MoveTo, Verify, Answer, Stop };
    Kind kind = Kind::Stop;
    Vec2 waypoint;              // MoveTo: lies in Free space of the agent map
    std::string observation_id; // Verify
    std::string text;           // Answer
};

struct StepOutcome {
    Action action;
    CognitiveState new_state = CognitiveState::Exploration;
    LogEntry log_entry; // state at acting time
};

struct JudgeOutcome {
    bool matched = false;
    bool judge_error = false;
};

struct MoveOutcome {
    Pose pose;
    double path_delta = 0.0;
    bool collided = false;
};

// What the loop needs from a world: posed observations, motion, and the
// ground truth used for scoring. One instance serves one episode.
class Environment {
public:
    virtual ~Environment() = default;
    virtual Pose current_pose() const = 0;
    // Observation at the current pose; id, episode and timestep are the
    // caller's to fill in.
    virtual std::pair<Observation, DepthScan> observe() = 0;
    // Straight-line motion toward the waypoint, truncated at obstacles.
    virtual MoveOutcome move_to(Vec2 waypoint) = 0;
    virtual std::string question() const = 0;
    virtual std::string scene_tag() const = 0;
    virtual Vec2 target_position() const = 0;
    // Length of the true shortest route spawn -> target, meters.
    virtual double gt_shortest_path_length() const = 0;
    // True for point-goal style tasks scored by final distance; false for
    // question tasks scored by the judged answer.
    virtual bool is_navigation_task() const = 0;
    virtual JudgeOutcome judge(const std::string& answer) = 0;
};

struct EpisodeResult {
    std::string episode_id;
    std::string answer;
    bool success = false;
    bool judged_match = false;
    bool judge_error = false;
    int steps = 0;
    double path_len = 0.0;      // meters actually traveled
    double shortest_len = 0.0;  // ground-truth optimum, meters
    double spl = 0.0;
    double final_distance = 0.0; // to target, meters
    bool aborted = false;
    std::string abort_reason;
    ReasoningLog log;
};

// Per-episode agent state. Construct, then feed one posed observation per
// step; the agent owns its map and semantic space and talks to the
// adjudicator as each state demands. Gateway failures never throw out of
// step(): every decision has a deterministic fallback.
class Agent {
public:
    Agent(AgentConfig cfg, GoalSpec goal, std::string episode_id, ChatClient& llm,
          Embedder& embedder, const EpisodicStore* episodic, const RuleStore* rules);

    // One cognitive step at the given pose. budget_exhausted forces the
    // answering state regardless of progress.
    StepOutcome step(Observation obs, const DepthScan& scan, const Pose& pose,
                     bool budget_exhausted);

    CognitiveState state() const { return state_; }
    const OccupancyGrid& grid() const { return grid_; }
    const SemanticStore& semantic() const { return semantic_; }
    const GoalSpec& goal() const { return goal_; }
    const std::vector<Pose>& retrieved_poses() const { return retrieved_poses_; }
    bool explore_mode() const { return explore_; }

    // Hands the episode's spaces over for episodic storage.
    EpisodeRecord finish(std::string scene_tag) &&;

private:
    struct Candidate {
        std::string observation_id;
        Vec2 position;
        std::string image_ref;
    };

    void run_recall(const Observation& current);
    std::optional<Candidate> detect_candidate();
    std::vector<Frontier> ranked_frontiers(const Pose& pose);
    std::optional<Vec2> stride_toward(const Pose& pose, Vec2 goal_world);
    std::string compose_answer(const Pose& pose);

    AgentConfig cfg_;
    GoalSpec goal_;
    std::string episode_id_;
    ChatClient& llm_;
    Embedder& embedder_;
    const EpisodicStore* episodic_;
    const RuleStore* rules_;

    OccupancyGrid grid_;
    SemanticStore semantic_;
    CognitiveState state_ = CognitiveState::Exploration;
    bool recall_done_ = false;
    bool explore_ = true;
    std::vector<Pose> retrieved_poses_;
    std::optional<Candidate> candidate_;
    bool candidate_confirmed_ = false;
    Vec2 target_position_;
    std::vector<std::string> blacklist_;
    std::vector<std::string> recent_images_;
    int steps_taken_ = 0;

    // Stall detection: a pursued frontier that yields no displacement for
    // consecutive steps is unreachable (for example behind a wall sliver)
    // and gets excluded from later ranking.
    Vec2 last_explore_pos_;
    bool have_last_explore_pos_ = false;
    int stall_count_ = 0;
    std::optional<Vec2> pursued_centroid_;
    std::vector<Vec2> unreachable_frontiers_;
};

// Runs the loop to completion: at most cfg.step_budget steps, ending in
// Answer or Stop. Success is judged answer match for question tasks,
// final distance within success_radius for navigation tasks. The
// completed episode is appended to `episodic` when given (after recall
// reads, so an episode never retrieves itself). Environment faults abort
// with a partial log.
EpisodeResult run_episode(const AgentConfig& cfg, const GoalSpec& goal,
                          const std::string& episode_id, Environment& env,
                          ChatClient& llm, Embedder& embedder,
                          EpisodicStore* episodic, const RuleStore* rules);

} // namespace himm

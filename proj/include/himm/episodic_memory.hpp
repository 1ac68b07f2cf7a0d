#pragma once

// Cross-episode recall: retrieve visually similar past observations,
// verify they come from the same locality, pick the best-matching past
// episode, and decide whether exploration is still needed.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "himm/occupancy_grid.hpp"
#include "himm/semantic_space.hpp"

namespace himm {

inline constexpr size_t kDefaultKRetrieve = 8;
inline constexpr size_t kDefaultKMatch = 8;

struct EpisodeRecord {
    std::string episode_id;
    SemanticStore semantic_space;
    OccupancyGrid physical_space;
    int64_t created_at = 0; // larger = more recent; 0 lets the store assign
    std::string scene_tag;  // optional, empty = none
};

struct ExploreDecision {
    bool explore = true;
    std::string rationale; // model reply excerpt or fallback reason
};

struct RetrievedObservation {
    std::string episode_id;
    std::string observation_id;
    float similarity = 0.0f;
};

struct EpisodicRecall {
    std::string source_episode_id;
    std::vector<std::string> verified_observations; // ids counted into selection
    std::vector<Pose> retrieved_poses;              // from those observations only
    int match_count = 0;
};

// Append-only episode collection. Single writer (episodes land when they
// finish), any number of readers.
class EpisodicStore {
public:
    explicit EpisodicStore(size_t dim = 384);

    size_t dim() const { return dim_; }
    size_t size() const { return episodes_.size(); }
    bool empty() const { return episodes_.empty(); }

    // Appends a completed episode. Throws DuplicateIdError on a repeated
    // id, ConfigError on an embedding dimension mismatch, ValidationError
    // when either space is empty (an episode that never observed or never
    // mapped anything is not a completed episode).
    void add_episode(EpisodeRecord record);

    const EpisodeRecord* find(const std::string& episode_id) const;
    const EpisodeRecord& at(const std::string& episode_id) const;
    const std::vector<EpisodeRecord>& episodes() const { return episodes_; }

private:
    size_t dim_;
    std::vector<EpisodeRecord> episodes_;
    std::unordered_map<std::string, size_t> index_by_id_;
    int64_t next_ordinal_ = 1;
};

// Top-K past observations across all episodes by cosine over global
// embeddings, descending, ties by storage order. The current episode's
// own observations never appear. Empty store yields an empty list.
std::vector<RetrievedObservation> retrieve_similar(const EpisodicStore& store,
                                                   const Observation& current,
                                                   size_t k = kDefaultKRetrieve);

// Asks the adjudicator, one candidate pair per call, whether the candidate
// view and the current view come from nearby locations; keeps the ones it
// affirms, order preserved. Gateway and schema failures propagate; the
// caller is expected to fall back to plain exploration.
std::vector<RetrievedObservation> verify_locality(
    const EpisodicStore& store, const std::vector<RetrievedObservation>& candidates,
    const std::string& current_image_ref, ChatClient& llm);

// Scores every verified observation against the goal's target embedding
// (best region cosine), takes the global top-K, and hands the episode
// with the most appearances back as a recall. Ties go to the most recent
// episode. Returns nullopt when nothing matches.
std::optional<EpisodicRecall> select_episode(
    const EpisodicStore& store, const std::vector<RetrievedObservation>& verified,
    const GoalSpec& goal, size_t k = kDefaultKMatch);

// Recall in hand, asks the adjudicator whether exploration is still
// required, showing the goal and the recalled views. No recall forces
// explore=true without a call; a failed call degrades to explore=true
// with rationale "fallback". Total: every input yields a decision.
ExploreDecision decide_explore(const EpisodicStore& store,
                               const std::optional<EpisodicRecall>& recall,
                               const GoalSpec& goal, ChatClient& llm);

} // namespace himm

#pragma once

// Pose-indexed store of embedded observations. Retrieval is an exact
// brute-force scan over flat embedding matrices; an approximate index
// would slot in behind the same queries but is deliberately not the
// default, since the tests demand exactness.

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "himm/geometry.hpp"
#include "himm/model_gateway.hpp"

namespace himm {

struct RegionEntry {
    std::vector<float> embedding; // unit norm, dimension = store dim
    Box3 box3d;
    std::string label; // optional, empty = none
};

struct Observation {
    std::string id;
    std::string episode_id;
    int timestep = 0;
    Pose pose;
    std::vector<float> global_embedding; // unit norm
    std::vector<RegionEntry> regions;
    std::string image_ref; // path or simulator handle, never pixels
};

struct GoalComponent {
    std::string text;
    std::vector<float> embedding;
};

struct GoalSpec {
    std::string raw_instruction;
    GoalComponent target_object;
    std::vector<GoalComponent> relative_objects;
    std::vector<GoalComponent> relative_areas;
};

enum class PriorityTier : int { Target = 0, RelativeObject = 1, RelativeArea = 2 };

struct RegionMatch {
    std::string observation_id;
    uint32_t region_index = 0;
    double similarity = 0.0;
};

struct RankedMatch {
    std::string observation_id;
    std::optional<uint32_t> region_index;
    double similarity = 0.0;
    PriorityTier tier = PriorityTier::Target;
};

class SemanticStore {
public:
    explicit SemanticStore(size_t dim = 384);

    size_t dim() const { return dim_; }
    size_t size() const { return observations_.size(); }
    size_t region_count() const { return region_owner_.size(); }
    bool empty() const { return observations_.empty(); }

    // Rejects duplicate ids (DuplicateIdError), wrong dimensions
    // (ConfigError) and embeddings off unit norm by more than 1e-3
    // (ValidationError). Stored embeddings are snapped to exact unit norm.
    void insert(Observation obs);

    const Observation* find(const std::string& id) const;
    const Observation& at(size_t index) const { return observations_.at(index); }

    // Top-k regions by cosine, descending, ties by insertion order.
    std::vector<RegionMatch> query_regions(std::vector<float> query, size_t k) const;

    // Per-tier top-k, concatenated tier-major: every Target match ranks
    // above every RelativeObject match, which ranks above RelativeArea.
    std::vector<RankedMatch> query_goal(const GoalSpec& goal, size_t k) const;

    // Deduplicated poses of the matched observations, in match order.
    std::vector<Pose> poses_of(const std::vector<RankedMatch>& matches) const;

    // Flat row-major matrix of global embeddings, one row per observation.
    const std::vector<float>& global_matrix() const { return global_matrix_; }

private:
    size_t dim_;
    std::vector<Observation> observations_;
    std::unordered_map<std::string, size_t> index_by_id_;
    std::vector<float> region_matrix_;
    std::vector<std::pair<uint32_t, uint32_t>> region_owner_; // (obs index, region index)
    std::vector<float> global_matrix_;
};

// Unit-normalizes, requiring the input to be within `tol` of unit norm
// already; throws ValidationError otherwise.
std::vector<float> require_near_unit(std::vector<float> v, double tol,
                                     const char* what);

// Splits an instruction into target object, relative objects and relative
// areas via the chat gateway, then embeds each component. Gateway or
// schema failures surface as DecompositionError with the raw reply.
GoalSpec decompose_goal(const std::string& instruction, ChatClient& llm,
                        Embedder& embedder);

// Builds a GoalSpec directly from known component texts (no chat call).
GoalSpec make_goal(const std::string& instruction, const std::string& target,
                   const std::vector<std::string>& relative_objects,
                   const std::vector<std::string>& relative_areas, Embedder& embedder);

} // namespace himm

#include "himm/semantic_space.hpp"

#include <algorithm>
#include <cmath>

#include "himm/kernels.hpp"
#include "himm/prompts.hpp"

namespace himm {

SemanticStore::SemanticStore(size_t dim) : dim_(dim) {
    if (dim == 0) throw ConfigError("semantic store dimension must be >= 1");
}

std::vector<float> require_near_unit(std::vector<float> v, double tol, const char* what) {
    double norm2 = 0.0;
    for (float x : v) norm2 += double(x) * double(x);
    double norm = std::sqrt(norm2);
    if (!(std::abs(norm - 1.0) <= tol))
        throw ValidationError(std::string(what) + ": embedding norm " +
                              std::to_string(norm) + " not within tolerance of 1");
    // Already unit to float precision: leave the bytes alone so that
    // serialization round trips are byte-stable.
    if (std::abs(norm - 1.0) <= 1e-5) return v;
    double inv = 1.0 / norm;
    for (float& x : v) x = float(x * inv);
    return v;
}

void SemanticStore::insert(Observation obs) {
    if (index_by_id_.count(obs.id))
        throw DuplicateIdError("duplicate observation id: " + obs.id);
    if (obs.global_embedding.size() != dim_)
        throw ConfigError("observation embedding dimension " +
                          std::to_string(obs.global_embedding.size()) +
                          " does not match store dimension " + std::to_string(dim_));
    obs.global_embedding = require_near_unit(std::move(obs.global_embedding), 1e-3,
                                             "insert_observation");
    for (RegionEntry& r : obs.regions) {
        if (r.embedding.size() != dim_)
            throw ConfigError("region embedding dimension mismatch in " + obs.id);
        r.embedding = require_near_unit(std::move(r.embedding), 1e-3, "insert_observation");
        if (r.box3d.extents.x < 0 || r.box3d.extents.y < 0 || r.box3d.extents.z < 0)
            throw ValidationError("negative region extents in " + obs.id);
    }

    const uint32_t obs_index = uint32_t(observations_.size());
    index_by_id_.emplace(obs.id, obs_index);
    global_matrix_.insert(global_matrix_.end(), obs.global_embedding.begin(),
                          obs.global_embedding.end());
    for (uint32_t r = 0; r < obs.regions.size(); ++r) {
        region_owner_.emplace_back(obs_index, r);
        region_matrix_.insert(region_matrix_.end(), obs.regions[r].embedding.begin(),
                              obs.regions[r].embedding.end());
    }
    observations_.push_back(std::move(obs));
}

const Observation* SemanticStore::find(const std::string& id) const {
    auto it = index_by_id_.find(id);
    return it == index_by_id_.end() ? nullptr : &observations_[it->second];
}

std::vector<RegionMatch> SemanticStore::query_regions(std::vector<float> query,
                                                      size_t k) const {
    if (k < 1) throw ConfigError("query_regions: k must be >= 1");
    if (query.size() != dim_) throw ValidationError("query dimension mismatch");
    query = require_near_unit(std::move(query), 1e-3, "query_regions");
    auto top = kernels::topk(region_matrix_.data(), region_owner_.size(), dim_,
                             query.data(), k);
    std::vector<RegionMatch> out;
    out.reserve(top.size());
    for (const auto& s : top) {
        const auto& [obs_index, region_index] = region_owner_[s.index];
        out.push_back({observations_[obs_index].id, region_index, double(s.score)});
    }
    return out;
}

std::vector<RankedMatch> SemanticStore::query_goal(const GoalSpec& goal, size_t k) const {
    if (k < 1) throw ConfigError("query_goal: k must be >= 1");
    std::vector<RankedMatch> out;
    const size_t n = region_owner_.size();
    if (n == 0) return out;

    std::vector<float> combined(n);
    std::vector<float> scores(n);
    auto run_tier = [&](PriorityTier tier, const std::vector<GoalComponent>& comps) {
        if (comps.empty()) return;
        std::fill(combined.begin(), combined.end(),
                  -std::numeric_limits<float>::infinity());
        for (const GoalComponent& c : comps) {
            if (c.embedding.size() != dim_)
                throw ValidationError("goal component dimension mismatch");
            kernels::score_rows_parallel(region_matrix_.data(), n, dim_,
                                         c.embedding.data(), scores.data());
            for (size_t i = 0; i < n; ++i) combined[i] = std::max(combined[i], scores[i]);
        }
        for (const auto& s : kernels::select_topk(combined.data(), n, k)) {
            const auto& [obs_index, region_index] = region_owner_[s.index];
            out.push_back({observations_[obs_index].id, region_index, double(s.score), tier});
        }
    };
    run_tier(PriorityTier::Target, {goal.target_object});
    run_tier(PriorityTier::RelativeObject, goal.relative_objects);
    run_tier(PriorityTier::RelativeArea, goal.relative_areas);
    return out;
}

std::vector<Pose> SemanticStore::poses_of(const std::vector<RankedMatch>& matches) const {
    std::vector<Pose> out;
    std::vector<const Observation*> seen;
    for (const RankedMatch& m : matches) {
        const Observation* obs = find(m.observation_id);
        if (!obs)
            throw MissingObservationError("poses_of: unknown observation " +
                                          m.observation_id);
        if (std::find(seen.begin(), seen.end(), obs) != seen.end()) continue;
        seen.push_back(obs);
        out.push_back(obs->pose);
    }
    return out;
}

GoalSpec decompose_goal(const std::string& instruction, ChatClient& llm,
                        Embedder& embedder) {
    if (instruction.empty())
        throw ValidationError("decompose_goal: empty instruction");
    ChatRequest req;
    req.system = prompts::kGoalDecompositionSystem;
    req.turns.push_back({"user", instruction, {}});
    req.schema = ReplySchema::GoalDecomposition;
    req.tags = {"goal-decomposition"};
    ParsedReply reply;
    try {
        reply = complete(llm, req);
    } catch (const SchemaError& e) {
        throw DecompositionError("goal decomposition failed: " + std::string(e.what()),
                                 e.raw_reply);
    } catch (const GatewayError& e) {
        throw DecompositionError("goal decomposition gateway failure: " +
                                     std::string(e.what()),
                                 "");
    }
    GoalSpec goal;
    goal.raw_instruction = instruction;
    goal.target_object = {reply.goal.target, embedder.embed(reply.goal.target)};
    for (const std::string& t : reply.goal.relative_objects)
        goal.relative_objects.push_back({t, embedder.embed(t)});
    for (const std::string& t : reply.goal.relative_areas)
        goal.relative_areas.push_back({t, embedder.embed(t)});
    return goal;
}

GoalSpec make_goal(const std::string& instruction, const std::string& target,
                   const std::vector<std::string>& relative_objects,
                   const std::vector<std::string>& relative_areas, Embedder& embedder) {
    GoalSpec goal;
    goal.raw_instruction = instruction;
    goal.target_object = {target, embedder.embed(target)};
    for (const std::string& t : relative_objects)
        goal.relative_objects.push_back({t, embedder.embed(t)});
    for (const std::string& t : relative_areas)
        goal.relative_areas.push_back({t, embedder.embed(t)});
    return goal;
}

} // namespace himm

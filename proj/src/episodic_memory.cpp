#include "himm/episodic_memory.hpp"

#include <algorithm>
#include <cmath>

#include "himm/kernels.hpp"
#include "himm/prompts.hpp"

namespace himm {

EpisodicStore::EpisodicStore(size_t dim) : dim_(dim) {
    if (dim == 0) throw ConfigError("episodic store dimension must be >= 1");
}

void EpisodicStore::add_episode(EpisodeRecord record) {
    if (index_by_id_.count(record.episode_id))
        throw DuplicateIdError("duplicate episode id: " + record.episode_id);
    if (record.semantic_space.dim() != dim_)
        throw ConfigError("episode embedding dimension " +
                          std::to_string(record.semantic_space.dim()) +
                          " does not match store dimension " + std::to_string(dim_));
    if (record.semantic_space.empty())
        throw ValidationError("episode " + record.episode_id + " has no observations");
    if (record.physical_space.known_count() == 0)
        throw ValidationError("episode " + record.episode_id + " has an empty map");
    if (record.created_at == 0) record.created_at = next_ordinal_;
    next_ordinal_ = std::max(next_ordinal_, record.created_at) + 1;
    index_by_id_.emplace(record.episode_id, episodes_.size());
    episodes_.push_back(std::move(record));
}

const EpisodeRecord* EpisodicStore::find(const std::string& episode_id) const {
    auto it = index_by_id_.find(episode_id);
    return it == index_by_id_.end() ? nullptr : &episodes_[it->second];
}

const EpisodeRecord& EpisodicStore::at(const std::string& episode_id) const {
    const EpisodeRecord* rec = find(episode_id);
    if (!rec) throw ValidationError("unknown episode id: " + episode_id);
    return *rec;
}

std::vector<RetrievedObservation> retrieve_similar(const EpisodicStore& store,
                                                   const Observation& current,
                                                   size_t k) {
    if (k < 1) throw ConfigError("retrieve_similar: k must be >= 1");
    if (current.global_embedding.size() != store.dim())
        throw ConfigError("retrieve_similar: query dimension mismatch");
    std::vector<float> query =
        require_near_unit(current.global_embedding, 1e-3, "retrieve_similar");

    // Flat candidate matrix over every foreign episode, storage order.
    const size_t dim = store.dim();
    std::vector<float> matrix;
    std::vector<std::pair<const EpisodeRecord*, size_t>> owner; // (episode, obs index)
    for (const EpisodeRecord& ep : store.episodes()) {
        if (ep.episode_id == current.episode_id) continue;
        const std::vector<float>& rows = ep.semantic_space.global_matrix();
        matrix.insert(matrix.end(), rows.begin(), rows.end());
        for (size_t i = 0; i < ep.semantic_space.size(); ++i) owner.emplace_back(&ep, i);
    }
    if (owner.empty()) return {};

    std::vector<RetrievedObservation> out;
    for (const auto& s : kernels::topk(matrix.data(), owner.size(), dim, query.data(), k)) {
        const auto& [ep, obs_index] = owner[s.index];
        out.push_back({ep->episode_id, ep->semantic_space.at(obs_index).id, s.score});
    }
    return out;
}

std::vector<RetrievedObservation> verify_locality(
    const EpisodicStore& store, const std::vector<RetrievedObservation>& candidates,
    const std::string& current_image_ref, ChatClient& llm) {
    if (candidates.empty())
        throw ValidationError("verify_locality: no candidates to verify");
    std::vector<RetrievedObservation> kept;
    for (const RetrievedObservation& cand : candidates) {
        const EpisodeRecord& ep = store.at(cand.episode_id);
        const Observation* obs = ep.semantic_space.find(cand.observation_id);
        if (!obs)
            throw MissingObservationError("verify_locality: unknown observation " +
                                          cand.observation_id);
        ChatRequest req;
        req.system = prompts::kLocalityCheckSystem;
        req.schema = ReplySchema::YesNo;
        req.tags = {"verify-locality"};
        req.turns.push_back({"user",
                             "Do these two views come from nearby locations in the "
                             "same place? First the current view, then a view "
                             "remembered from a past visit.",
                             {current_image_ref, obs->image_ref}});
        if (complete(llm, req).yes) kept.push_back(cand);
    }
    return kept;
}

namespace {

std::string excerpt(const std::string& raw) {
    constexpr size_t kMax = 200;
    return raw.size() <= kMax ? raw : raw.substr(0, kMax);
}

} // namespace

std::optional<EpisodicRecall> select_episode(
    const EpisodicStore& store, const std::vector<RetrievedObservation>& verified,
    const GoalSpec& goal, size_t k) {
    if (k < 1) throw ConfigError("select_episode: k must be >= 1");
    if (verified.empty()) return std::nullopt;
    const std::vector<float>& target = goal.target_object.embedding;
    if (target.size() != store.dim())
        throw ConfigError("select_episode: goal embedding dimension mismatch");

    // One score per verified observation: its best region match against
    // the target. Observations with no regions never score.
    std::vector<float> scores;
    std::vector<size_t> ref; // index into `verified`
    for (size_t i = 0; i < verified.size(); ++i) {
        const EpisodeRecord& ep = store.at(verified[i].episode_id);
        const Observation* obs = ep.semantic_space.find(verified[i].observation_id);
        if (!obs)
            throw MissingObservationError("select_episode: unknown observation " +
                                          verified[i].observation_id);
        if (obs->regions.empty()) continue;
        float best = -std::numeric_limits<float>::infinity();
        for (const RegionEntry& r : obs->regions) {
            double dot = 0.0;
            for (size_t d = 0; d < target.size(); ++d)
                dot += double(target[d]) * double(r.embedding[d]);
            best = std::max(best, float(dot));
        }
        scores.push_back(best);
        ref.push_back(i);
    }
    if (scores.empty()) return std::nullopt;

    // Global top-K over the pool, then count appearances per episode.
    std::vector<kernels::ScoredIndex> top = kernels::select_topk(scores.data(), scores.size(), k);
    std::unordered_map<std::string, int> counts;
    for (const auto& s : top) ++counts[verified[ref[s.index]].episode_id];

    const EpisodeRecord* winner = nullptr;
    int best_count = 0;
    for (const EpisodeRecord& ep : store.episodes()) {
        auto it = counts.find(ep.episode_id);
        if (it == counts.end()) continue;
        // Later storage order = more recent, so >= prefers it on ties.
        if (!winner || it->second > best_count ||
            (it->second == best_count && ep.created_at >= winner->created_at)) {
            winner = &ep;
            best_count = it->second;
        }
    }
    if (!winner) return std::nullopt;

    EpisodicRecall recall;
    recall.source_episode_id = winner->episode_id;
    recall.match_count = best_count;
    for (const auto& s : top) {
        const RetrievedObservation& cand = verified[ref[s.index]];
        if (cand.episode_id != winner->episode_id) continue;
        recall.verified_observations.push_back(cand.observation_id);
        recall.retrieved_poses.push_back(
            winner->semantic_space.find(cand.observation_id)->pose);
    }
    return recall;
}

ExploreDecision decide_explore(const EpisodicStore& store,
                               const std::optional<EpisodicRecall>& recall,
                               const GoalSpec& goal, ChatClient& llm) {
    if (!recall) return {true, "no prior episode"};
    try {
        const EpisodeRecord& ep = store.at(recall->source_episode_id);
        ChatRequest req;
        req.system = prompts::kExploreDecisionSystem;
        req.schema = ReplySchema::YesNo;
        req.tags = {"decide-explore"};
        ChatTurn turn;
        turn.text = "Task: " + goal.raw_instruction +
                    "\nThe attached views were recalled from a past visit to this "
                    "place. Is further exploration required to solve the task? "
                    "Answer yes or no.";
        for (const std::string& obs_id : recall->verified_observations) {
            const Observation* obs = ep.semantic_space.find(obs_id);
            if (!obs)
                throw MissingObservationError("decide_explore: unknown observation " +
                                              obs_id);
            turn.image_refs.push_back(obs->image_ref);
        }
        req.turns.push_back(std::move(turn));
        ParsedReply reply = complete(llm, req);
        return {reply.yes, excerpt(reply.raw)};
    } catch (const Error&) {
        return {true, "fallback"};
    }
}

} // namespace himm

#include "himm/cognitive_controller.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "himm/prompts.hpp"

namespace himm {

CognitiveState transition(CognitiveState state, const Signals& signals) {
    if (signals.budget_exhausted) return CognitiveState::CheckReadyToAnswer;
    switch (state) {
        case CognitiveState::Exploration:
            return signals.target_candidate_found ? CognitiveState::TargetVerification
                                                  : CognitiveState::Exploration;
        case CognitiveState::TargetVerification:
            return signals.target_confirmed ? CognitiveState::TargetApproaching
                                            : CognitiveState::Exploration;
        case CognitiveState::TargetApproaching:
            return signals.at_target ? CognitiveState::CheckReadyToAnswer
                                     : CognitiveState::TargetApproaching;
        case CognitiveState::CheckReadyToAnswer:
            return signals.ready_to_answer ? CognitiveState::CheckReadyToAnswer
                                           : CognitiveState::Exploration;
    }
    return state;
}

bool is_legal_transition(CognitiveState from, CognitiveState to) {
    using S = CognitiveState;
    // The budget override makes CheckReadyToAnswer reachable from anywhere.
    if (to == S::CheckReadyToAnswer) return true;
    switch (from) {
        case S::Exploration: return to == S::Exploration || to == S::TargetVerification;
        case S::TargetVerification:
            return to == S::Exploration || to == S::TargetApproaching;
        case S::TargetApproaching: return to == S::TargetApproaching;
        case S::CheckReadyToAnswer: return to == S::Exploration;
    }
    return false;
}

void validate_config(const AgentConfig& cfg) {
    if (cfg.resolution <= 0.0 || cfg.max_range <= 0.0)
        throw ConfigError("resolution and max_range must be > 0");
    if (cfg.k_retrieve < 1 || cfg.k_match < 1 || cfg.rule_top_k < 1)
        throw ConfigError("retrieval counts must be >= 1");
    if (cfg.step_budget < 1) throw ConfigError("step budget must be >= 1");
    if (cfg.success_radius <= 0.0) throw ConfigError("success radius must be > 0");
    if (cfg.min_unknown_area < 1) throw ConfigError("min unknown area must be >= 1");
    if (cfg.d_min < 0.0) throw ConfigError("d_min must be >= 0");
    if (cfg.step_length <= 0.0) throw ConfigError("step length must be > 0");
}

namespace {

bool straight_line_free(const OccupancyGrid& grid, Vec2 a, Vec2 b) {
    const double len = distance(a, b);
    const double ds = grid.resolution() * 0.5;
    const int n = std::max(1, int(std::ceil(len / ds)));
    for (int i = 0; i <= n; ++i) {
        const double t = double(i) / n;
        const Vec2 p{a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t};
        const GridIndex c = grid.world_to_cell(p);
        if (!grid.in_bounds(c) || grid.at(c) != CellState::Free) return false;
    }
    return true;
}

std::string format_meters(double v) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << v;
    return os.str();
}

} // namespace

Agent::Agent(AgentConfig cfg, GoalSpec goal, std::string episode_id, ChatClient& llm,
             Embedder& embedder, const EpisodicStore* episodic, const RuleStore* rules)
    : cfg_(std::move(cfg)),
      goal_(std::move(goal)),
      episode_id_(std::move(episode_id)),
      llm_(llm),
      embedder_(embedder),
      episodic_(episodic),
      rules_(rules),
      grid_(cfg_.resolution, {0.0, 0.0}, 1, 1),
      semantic_(embedder.dim()) {
    validate_config(cfg_);
}

void Agent::run_recall(const Observation& current) {
    recall_done_ = true;
    try {
        const auto candidates = retrieve_similar(*episodic_, current, cfg_.k_retrieve);
        std::optional<EpisodicRecall> recall;
        if (!candidates.empty()) {
            const auto verified =
                verify_locality(*episodic_, candidates, current.image_ref, llm_);
            recall = select_episode(*episodic_, verified, goal_, cfg_.k_match);
        }
        if (recall) retrieved_poses_ = recall->retrieved_poses;
        const ExploreDecision decision = decide_explore(*episodic_, recall, goal_, llm_);
        explore_ = decision.explore;
    } catch (const Error&) {
        explore_ = true;
        retrieved_poses_.clear();
    }
}

std::optional<Agent::Candidate> Agent::detect_candidate() {
    if (semantic_.region_count() == 0) return std::nullopt;
    for (const RankedMatch& m : semantic_.query_goal(goal_, cfg_.k_match)) {
        if (m.tier != PriorityTier::Target) continue;
        if (m.similarity < cfg_.candidate_trigger) continue;
        if (!m.region_index) continue;
        if (std::find(blacklist_.begin(), blacklist_.end(), m.observation_id) !=
            blacklist_.end())
            continue;
        const Observation* obs = semantic_.find(m.observation_id);
        const RegionEntry& region = obs->regions[*m.region_index];
        return Candidate{m.observation_id, region.box3d.center.xy(), obs->image_ref};
    }
    return std::nullopt;
}

std::vector<Frontier> Agent::ranked_frontiers(const Pose& pose) {
    std::vector<Frontier> frontiers = extract_frontiers(grid_, cfg_.min_unknown_area);
    if (frontiers.empty()) return frontiers;
    AnnotatedExplorationMap annotated =
        render_retrieved_poses(grid_, retrieved_poses_, pose, std::move(frontiers));
    std::vector<Frontier> kept = prune_frontiers(annotated, explore_, cfg_.d_min);
    std::erase_if(kept, [&](const Frontier& f) {
        for (const Vec2& u : unreachable_frontiers_)
            if (distance(f.centroid, u) < grid_.resolution()) return true;
        return false;
    });
    const Vec2 here = pose.position.xy();
    std::sort(kept.begin(), kept.end(), [&](const Frontier& a, const Frontier& b) {
        const double da = distance(here, a.centroid);
        const double db = distance(here, b.centroid);
        if (a.dist_to_retrieved != b.dist_to_retrieved)
            return a.dist_to_retrieved < b.dist_to_retrieved;
        if (da != db) return da < db;
        if (a.cells.front().y != b.cells.front().y)
            return a.cells.front().y < b.cells.front().y;
        return a.cells.front().x < b.cells.front().x;
    });
    return kept;
}

std::optional<Vec2> Agent::stride_toward(const Pose& pose, Vec2 goal_world) {
    const auto goal_cell = nearest_free_cell(grid_, goal_world);
    if (!goal_cell) return std::nullopt;
    const auto path = shortest_path(grid_, pose, grid_.cell_center(*goal_cell));
    if (!path) return std::nullopt;
    const auto& w = path->waypoints;
    if (w.size() < 2) return w.front();
    const Vec2 here = pose.position.xy();
    Vec2 best = w[1];
    double acc = 0.0;
    for (size_t i = 1; i < w.size(); ++i) {
        acc += distance(w[i - 1], w[i]);
        if (acc > cfg_.step_length + 1e-9) break;
        if (straight_line_free(grid_, here, w[i])) best = w[i];
    }
    return best;
}

std::string Agent::compose_answer(const Pose&) {
    std::string system = prompts::kAnswerSystem;
    if (cfg_.rules_enabled && rules_ && !rules_->empty()) {
        try {
            const auto scored =
                retrieve_rules(*rules_, goal_.raw_instruction, embedder_, cfg_.rule_top_k);
            std::vector<Rule> retrieved;
            for (const ScoredRule& s : scored) retrieved.push_back(s.rule);
            if (!retrieved.empty())
                system += "\nKnown rules:\n" + format_rules_for_prompt(retrieved);
        } catch (const Error&) {
            // Answer without rules rather than not at all.
        }
    }
    ChatRequest req;
    req.system = std::move(system);
    req.schema = ReplySchema::FreeText;
    req.tags = {"answer"};
    ChatTurn turn;
    turn.text = "Question: " + goal_.raw_instruction + "\nAnswer from the evidence.";
    if (candidate_) turn.image_refs.push_back(candidate_->image_ref);
    const size_t attach = std::min<size_t>(recent_images_.size(), 2);
    for (size_t i = recent_images_.size() - attach; i < recent_images_.size(); ++i)
        if (!candidate_ || recent_images_[i] != candidate_->image_ref)
            turn.image_refs.push_back(recent_images_[i]);
    req.turns.push_back(std::move(turn));
    try {
        return complete(llm_, req).text;
    } catch (const Error&) {
        return "unknown";
    }
}

StepOutcome Agent::step(Observation obs, const DepthScan& scan, const Pose& pose,
                        bool budget_exhausted) {
    if (steps_taken_ == 0) {
        // Seed the map around the first pose; growth handles the rest.
        const int half = int(cfg_.max_range / cfg_.resolution) + 8;
        grid_ = OccupancyGrid(
            cfg_.resolution,
            {pose.position.x - half * cfg_.resolution,
             pose.position.y - half * cfg_.resolution},
            2 * half + 1, 2 * half + 1);
    }
    const std::string image_ref = obs.image_ref;
    semantic_.insert(std::move(obs));
    grid_ = integrate_depth_scan(std::move(grid_), pose, scan, cfg_.max_range);
    recent_images_.push_back(image_ref);

    if (budget_exhausted) {
        Signals forced;
        forced.budget_exhausted = true;
        state_ = transition(state_, forced);
    }
    const CognitiveState acting = state_;
    const Vec2 here = pose.position.xy();
    const Vec2 hold = grid_.cell_center(grid_.world_to_cell(here));

    Signals sig;
    sig.budget_exhausted = budget_exhausted;
    Action action;
    std::ostringstream summary;

    switch (acting) {
        case CognitiveState::Exploration: {
            if (cfg_.recall_enabled && !recall_done_ && episodic_ && !episodic_->empty()) {
                run_recall(semantic_.at(semantic_.size() - 1));
                summary << "recall: explore=" << (explore_ ? "yes" : "no") << " landmarks="
                        << retrieved_poses_.size() << "; ";
            }
            if (!candidate_) candidate_ = detect_candidate();
            if (candidate_) {
                sig.target_candidate_found = true;
                action = {Action::Kind::MoveTo, hold, "", ""};
                summary << "candidate " << candidate_->observation_id
                        << " sighted, holding for verification";
                break;
            }
            if (pursued_centroid_ && have_last_explore_pos_ &&
                distance(here, last_explore_pos_) < 0.5 * grid_.resolution()) {
                if (++stall_count_ >= 2) {
                    unreachable_frontiers_.push_back(*pursued_centroid_);
                    pursued_centroid_.reset();
                    stall_count_ = 0;
                }
            } else {
                stall_count_ = 0;
            }
            last_explore_pos_ = here;
            have_last_explore_pos_ = true;
            const std::vector<Frontier> frontiers = ranked_frontiers(pose);
            if (frontiers.empty()) {
                sig.budget_exhausted = true; // nothing left to explore
                action = {Action::Kind::MoveTo, hold, "", ""};
                summary << "no frontier passes pruning; forcing answer check";
                break;
            }
            size_t chosen = 0;
            {
                ChatRequest req;
                req.system = prompts::kFrontierChoiceSystem;
                req.schema = ReplySchema::IndexChoice;
                req.option_count = int(frontiers.size());
                req.tags = {"choose-frontier"};
                std::ostringstream text;
                text << "Task: " << goal_.raw_instruction << "\nFrontiers:\n";
                for (size_t i = 0; i < frontiers.size(); ++i) {
                    const Frontier& f = frontiers[i];
                    text << i << ": centroid=(" << format_meters(f.centroid.x) << ", "
                         << format_meters(f.centroid.y) << ") size=" << f.size
                         << " dist=" << format_meters(distance(here, f.centroid)) << " m";
                    if (std::isfinite(f.dist_to_retrieved))
                        text << " landmark=" << format_meters(f.dist_to_retrieved) << " m";
                    text << "\n";
                }
                req.turns.push_back({"user", text.str(), {image_ref}});
                try {
                    chosen = size_t(complete(llm_, req).index);
                } catch (const Error&) {
                    chosen = 0; // nearest-ranked fallback
                }
            }
            std::optional<Vec2> waypoint;
            size_t used = chosen;
            if (auto w = stride_toward(pose, frontiers[chosen].centroid)) {
                waypoint = w;
            } else {
                for (size_t i = 0; i < frontiers.size() && !waypoint; ++i) {
                    if (i == chosen) continue;
                    if (auto alt = stride_toward(pose, frontiers[i].centroid)) {
                        waypoint = alt;
                        used = i;
                    }
                }
            }
            if (!waypoint) {
                sig.budget_exhausted = true; // frontiers exist but none is reachable
                action = {Action::Kind::MoveTo, hold, "", ""};
                summary << "no frontier reachable; forcing answer check";
                break;
            }
            pursued_centroid_ = frontiers[used].centroid;
            action = {Action::Kind::MoveTo, *waypoint, "", ""};
            summary << "moving toward frontier " << used << " of " << frontiers.size()
                    << " at (" << format_meters(frontiers[used].centroid.x) << ", "
                    << format_meters(frontiers[used].centroid.y) << ")";
            break;
        }
        case CognitiveState::TargetVerification: {
            const Candidate cand = *candidate_;
            bool confirmed = false;
            ChatRequest req;
            req.system = prompts::kTargetVerifySystem;
            req.schema = ReplySchema::YesNo;
            req.tags = {"verify-target"};
            req.turns.push_back({"user",
                                 "Task: " + goal_.raw_instruction +
                                     "\nDoes the attached view show the requested "
                                     "target? Answer yes or no.",
                                 {cand.image_ref}});
            try {
                confirmed = complete(llm_, req).yes;
            } catch (const Error&) {
                confirmed = false; // treat as rejection, keep exploring
            }
            if (confirmed) {
                sig.target_confirmed = true;
                candidate_confirmed_ = true;
                target_position_ = cand.position;
                summary << "candidate " << cand.observation_id << " confirmed as target";
            } else {
                blacklist_.push_back(cand.observation_id);
                candidate_.reset();
                summary << "candidate " << cand.observation_id << " rejected";
            }
            action = {Action::Kind::Verify, {}, cand.observation_id, ""};
            break;
        }
        case CognitiveState::TargetApproaching: {
            const double dist = distance(here, target_position_);
            if (dist <= cfg_.success_radius) {
                sig.at_target = true;
                action = {Action::Kind::MoveTo, hold, "", ""};
                summary << "reached target vicinity (" << format_meters(dist) << " m)";
                break;
            }
            if (auto w = stride_toward(pose, target_position_)) {
                action = {Action::Kind::MoveTo, *w, "", ""};
                summary << "approaching target, " << format_meters(dist) << " m away";
            } else {
                action = {Action::Kind::MoveTo, hold, "", ""};
                summary << "target route blocked, waiting for map updates";
            }
            break;
        }
        case CognitiveState::CheckReadyToAnswer: {
            bool ready = true;
            if (!budget_exhausted) {
                ChatRequest req;
                req.system = prompts::kReadyCheckSystem;
                req.schema = ReplySchema::YesNo;
                req.tags = {"ready-check"};
                req.turns.push_back({"user",
                                     "Question: " + goal_.raw_instruction +
                                         "\nIs the gathered evidence enough to answer "
                                         "now? Answer yes or no.",
                                     {image_ref}});
                try {
                    ready = complete(llm_, req).yes;
                } catch (const Error&) {
                    ready = true; // answer from what we have
                }
            }
            if (ready) {
                sig.ready_to_answer = true;
                const std::string answer = compose_answer(pose);
                action = {Action::Kind::Answer, {}, "", answer};
                summary << (budget_exhausted ? "budget exhausted, answering: "
                                             : "answering: ")
                        << answer;
            } else {
                if (candidate_ && candidate_confirmed_) {
                    blacklist_.push_back(candidate_->observation_id);
                    candidate_.reset();
                    candidate_confirmed_ = false;
                }
                action = {Action::Kind::MoveTo, hold, "", ""};
                summary << "not ready to answer, resuming exploration";
            }
            break;
        }
    }

    StepOutcome out;
    out.action = std::move(action);
    out.new_state = transition(acting, sig);
    out.log_entry.point = {steps_taken_, here, acting, image_ref};
    out.log_entry.summary = summary.str();
    state_ = out.new_state;
    ++steps_taken_;
    return out;
}

EpisodeRecord Agent::finish(std::string scene_tag) && {
    EpisodeRecord rec;
    rec.episode_id = episode_id_;
    rec.semantic_space = std::move(semantic_);
    rec.physical_space = std::move(grid_);
    rec.scene_tag = std::move(scene_tag);
    return rec;
}

EpisodeResult run_episode(const AgentConfig& cfg, const GoalSpec& goal,
                          const std::string& episode_id, Environment& env,
                          ChatClient& llm, Embedder& embedder,
                          EpisodicStore* episodic, const RuleStore* rules) {
    validate_config(cfg);
    EpisodeResult res;
    res.episode_id = episode_id;
    res.log.episode_id = episode_id;
    res.log.instruction = goal.raw_instruction;
    res.shortest_len = env.gt_shortest_path_length();

    Agent agent(cfg, goal, episode_id, llm, embedder,
                cfg.recall_enabled ? episodic : nullptr, rules);
    bool answered = false;
    try {
        for (int t = 0; t < cfg.step_budget; ++t) {
            const Pose pose = env.current_pose();
            auto [obs, scan] = env.observe();
            obs.id = episode_id + "/obs-" + std::to_string(t);
            obs.episode_id = episode_id;
            obs.timestep = t;
            const StepOutcome out =
                agent.step(std::move(obs), scan, pose, t == cfg.step_budget - 1);
            res.log.entries.push_back(out.log_entry);
            ++res.steps;
            if (out.action.kind == Action::Kind::MoveTo) {
                const MoveOutcome mv = env.move_to(out.action.waypoint);
                res.path_len += mv.path_delta;
            } else if (out.action.kind == Action::Kind::Answer) {
                res.answer = out.action.text;
                answered = true;
                break;
            } else if (out.action.kind == Action::Kind::Stop) {
                break;
            }
        }
    } catch (const std::exception& e) {
        res.aborted = true;
        res.abort_reason = e.what();
    }

    res.final_distance = distance(env.current_pose().position.xy(), env.target_position());
    if (answered) {
        const JudgeOutcome judged = env.judge(res.answer);
        res.judged_match = judged.matched;
        res.judge_error = judged.judge_error;
        res.success = env.is_navigation_task()
                          ? res.final_distance <= cfg.success_radius
                          : judged.matched;
    }
    res.spl = compute_spl(res.success, res.shortest_len, res.path_len);

    if (episodic && !res.aborted && agent.semantic().size() > 0 &&
        agent.grid().known_count() > 0)
        episodic->add_episode(std::move(agent).finish(env.scene_tag()));
    return res;
}

} // namespace himm

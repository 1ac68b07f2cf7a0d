#include "himm/semantic_memory.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "himm/kernels.hpp"
#include "himm/prompts.hpp"
#include "himm/semantic_space.hpp"

namespace himm {

void validate_trajectory(const GroundTruthTrajectory& gt) {
    if (gt.waypoints.size() < 2)
        throw ValidationError("ground-truth trajectory needs at least 2 waypoints");
    for (size_t i = 0; i < gt.waypoints.size(); ++i) {
        if (!finite(gt.waypoints[i]))
            throw ValidationError("non-finite ground-truth waypoint");
        if (i > 0 && distance(gt.waypoints[i - 1], gt.waypoints[i]) == 0.0)
            throw ValidationError("repeated consecutive ground-truth waypoint");
    }
}

void validate_log(const ReasoningLog& log) {
    if (log.entries.empty()) throw ValidationError("reasoning log is empty");
    for (size_t i = 1; i < log.entries.size(); ++i)
        if (log.entries[i].point.timestep <= log.entries[i - 1].point.timestep)
            throw ValidationError("log timesteps must be strictly increasing");
}

std::vector<double> deviation_series(const ReasoningLog& log,
                                     const GroundTruthTrajectory& gt) {
    validate_log(log);
    validate_trajectory(gt);
    std::vector<Vec2> points;
    points.reserve(log.entries.size());
    for (const LogEntry& e : log.entries) points.push_back(e.point.position);
    std::vector<double> out(points.size());
    kernels::polyline_distances(points.data(), points.size(), gt.waypoints.data(),
                                gt.waypoints.size(), out.data());
    return out;
}

int count_crossings(const std::vector<double>& series, double s) {
    int k = 0;
    for (size_t t = 1; t < series.size(); ++t)
        if (series[t] > s && series[t - 1] <= s) ++k;
    return k;
}

DeviationResult detect_deviations(const std::vector<double>& series,
                                  const ThresholdSchedule& schedule) {
    if (!(schedule.s_lo > 0.0) || !(schedule.s_hi > schedule.s_lo) ||
        !(schedule.step > 0.0))
        throw ConfigError("threshold schedule must satisfy s_hi > s_lo > 0, step > 0");
    if (schedule.s_hi - schedule.s_lo < schedule.step - 1e-12)
        throw ConfigError("threshold schedule too narrow for its step");
    if (!(schedule.p_stop > 0.0) || schedule.p_stop > 1.0)
        throw ConfigError("p_stop must lie in (0, 1]");
    if (series.size() < 2)
        throw ValidationError("deviation series needs at least 2 values");

    auto events_at = [&](double s) {
        std::vector<DeviationEvent> ev;
        for (size_t t = 1; t < series.size(); ++t)
            if (series[t] > s && series[t - 1] <= s)
                ev.push_back({int(t), series[t], s, ""});
        return ev;
    };

    std::mt19937_64 rng(schedule.rng_seed);
    std::bernoulli_distribution accept(schedule.p_stop);

    struct Candidate {
        double s;
        int k;
    };
    std::vector<Candidate> swept;
    for (int i = 0;; ++i) {
        const double s = schedule.s_hi - i * schedule.step;
        if (s < schedule.s_lo - 1e-9) break;
        const int k = count_crossings(series, s);
        swept.push_back({s, k});
        if (k >= 3 && k <= 5 && accept(rng))
            return {s, events_at(s)};
    }

    // Unaccepted sweep: nearest count to 4 within [3,5], larger s on ties.
    const Candidate* best = nullptr;
    for (const Candidate& c : swept) {
        if (c.k < 3 || c.k > 5) continue;
        if (!best || std::abs(c.k - 4) < std::abs(best->k - 4)) best = &c;
    }
    // Then the most crossings that still fit under 5.
    if (!best) {
        for (const Candidate& c : swept) {
            if (c.k < 1 || c.k > 5) continue;
            if (!best || c.k > best->k) best = &c;
        }
    }
    if (!best) return {schedule.s_lo, {}};
    return {best->s, events_at(best->s)};
}

void attach_log_refs(std::vector<DeviationEvent>& events, const ReasoningLog& log) {
    for (DeviationEvent& e : events) {
        if (e.timestep < 0 || size_t(e.timestep) >= log.entries.size())
            throw ValidationError("deviation event index outside the log");
        const LogEntry& entry = log.entries[size_t(e.timestep)];
        e.timestep = entry.point.timestep;
        e.image_ref = entry.point.image_ref;
    }
}

namespace {

const std::set<std::string>& structural_keywords() {
    static const std::set<std::string> kw = {
        "if",   "then",  "else", "elif",     "end",  "endif", "while", "for",
        "do",   "done",  "in",   "return",   "break", "continue", "and", "or",
        "not",  "true",  "false", "set",     "to",   "call",  "repeat", "until",
        "each", "is",    "stop", "loop",     "when", "otherwise", "yes", "no",
        "none", "null"};
    return kw;
}

std::string lower(std::string s) {
    for (char& c : s) c = char(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

} // namespace

PseudocodeWorkflow validate_workflow(const WorkflowParts& parts) {
    if (parts.body.empty()) throw ValidationError("workflow body is empty");
    std::set<std::string> declared;
    for (const WorkflowSymbol& s : parts.variables) {
        if (s.name.empty()) throw ValidationError("workflow variable with empty name");
        declared.insert(s.name);
    }
    for (const WorkflowSymbol& s : parts.functions) {
        if (s.name.empty()) throw ValidationError("workflow function with empty name");
        declared.insert(s.name);
    }
    for (const std::string& line : parts.body) {
        size_t i = 0;
        while (i < line.size()) {
            const unsigned char c = static_cast<unsigned char>(line[i]);
            if (!std::isalpha(c) && line[i] != '_') {
                ++i;
                continue;
            }
            size_t j = i;
            while (j < line.size()) {
                const unsigned char d = static_cast<unsigned char>(line[j]);
                if (!std::isalnum(d) && line[j] != '_') break;
                ++j;
            }
            const std::string token = line.substr(i, j - i);
            if (!declared.count(token) && !structural_keywords().count(lower(token)))
                throw ValidationError("workflow body uses undeclared symbol '" + token +
                                      "' in line: " + line);
            i = j;
        }
    }
    return {parts.variables, parts.functions, parts.body};
}

std::string render_log(const ReasoningLog& log) {
    std::ostringstream os;
    for (const LogEntry& e : log.entries)
        os << "t=" << e.point.timestep << " state=" << cognitive_state_name(e.point.state)
           << " " << e.summary << "\n";
    return os.str();
}

std::string render_workflow(const PseudocodeWorkflow& wf) {
    std::ostringstream os;
    os << "variables:\n";
    for (const WorkflowSymbol& s : wf.variables)
        os << "  " << s.name << ": " << s.description << "\n";
    os << "functions:\n";
    for (const WorkflowSymbol& s : wf.functions)
        os << "  " << s.name << ": " << s.description << "\n";
    os << "body:\n";
    for (const std::string& line : wf.body) os << "  " << line << "\n";
    return os.str();
}

PseudocodeWorkflow extract_pseudocode(const ReasoningLog& log, ChatClient& llm) {
    validate_log(log);
    ChatRequest req;
    req.system = prompts::kPseudocodeSystem;
    req.schema = ReplySchema::Workflow;
    req.tags = {"extract-pseudocode"};
    req.turns.push_back(
        {"user", "Task: " + log.instruction + "\nReasoning log:\n" + render_log(log), {}});
    ParsedReply reply;
    try {
        reply = complete(llm, req);
    } catch (const SchemaError& e) {
        throw ExtractionError("pseudocode extraction failed: " + std::string(e.what()),
                              e.raw_reply);
    } catch (const GatewayError& e) {
        throw ExtractionError(
            "pseudocode extraction gateway failure: " + std::string(e.what()), "");
    }
    return validate_workflow(reply.workflow);
}

RuleExtraction extract_rules(const std::string& gt_answer, const ReasoningLog& log,
                             const PseudocodeWorkflow& workflow,
                             const std::vector<DeviationEvent>& events,
                             ChatClient& llm, Embedder& embedder) {
    validate_log(log);
    std::set<std::string> declared;
    for (const WorkflowSymbol& s : workflow.variables) declared.insert(s.name);
    for (const WorkflowSymbol& s : workflow.functions) declared.insert(s.name);

    ChatRequest req;
    req.system = prompts::kRuleExtractionSystem;
    req.schema = ReplySchema::Rules;
    req.tags = {"extract-rules"};
    ChatTurn turn;
    std::ostringstream text;
    text << "Ground-truth answer: " << gt_answer << "\nTask: " << log.instruction
         << "\nReasoning log:\n"
         << render_log(log) << "Workflow:\n"
         << render_workflow(workflow);
    if (!events.empty()) {
        text << "Decision deviations (views attached in order):\n";
        for (const DeviationEvent& e : events) {
            text << "  t=" << e.timestep << " offset=" << e.h_value << " m\n";
            if (!e.image_ref.empty()) turn.image_refs.push_back(e.image_ref);
        }
    }
    turn.text = text.str();
    req.turns.push_back(std::move(turn));

    ParsedReply reply;
    try {
        reply = complete(llm, req);
    } catch (const SchemaError& e) {
        throw ExtractionError("rule extraction failed: " + std::string(e.what()),
                              e.raw_reply);
    } catch (const GatewayError& e) {
        throw ExtractionError("rule extraction gateway failure: " + std::string(e.what()),
                              "");
    }

    const std::vector<float> question = embedder.embed(log.instruction);
    RuleExtraction out;
    for (const RuleDraft& draft : reply.rules) {
        if (!declared.count(draft.anchor)) {
            ++out.dropped;
            continue;
        }
        out.rules.push_back({draft.form, draft.key, draft.value, draft.anchor,
                             log.episode_id, question});
    }
    return out;
}

RuleStore::RuleStore(size_t dim) : dim_(dim) {
    if (dim == 0) throw ConfigError("rule store dimension must be >= 1");
}

void RuleStore::add_rule(Rule rule) {
    if (rule.question_embedding.size() != dim_)
        throw ConfigError("rule embedding dimension " +
                          std::to_string(rule.question_embedding.size()) +
                          " does not match store dimension " + std::to_string(dim_));
    if (rule.key.empty() || rule.value.empty() || rule.anchor.empty())
        throw ValidationError("rule with empty key, value, or anchor");
    rule.question_embedding =
        require_near_unit(std::move(rule.question_embedding), 1e-3, "add_rule");
    matrix_.insert(matrix_.end(), rule.question_embedding.begin(),
                   rule.question_embedding.end());
    rules_.push_back(std::move(rule));
}

std::vector<ScoredRule> retrieve_rules(const RuleStore& store,
                                       const std::string& question,
                                       Embedder& embedder, size_t k) {
    if (k < 1) throw ConfigError("retrieve_rules: k must be >= 1");
    if (store.empty()) return {};
    std::vector<float> query = embedder.embed(question);
    if (query.size() != store.dim())
        throw ConfigError("retrieve_rules: embedder dimension mismatch");
    std::vector<ScoredRule> out;
    for (const auto& s : kernels::topk(store.embedding_matrix().data(), store.size(),
                                       store.dim(), query.data(), k))
        out.push_back({store.rules()[s.index], double(s.score)});
    return out;
}

std::string format_rules_for_prompt(const std::vector<Rule>& rules) {
    std::ostringstream os;
    for (const Rule& r : rules)
        os << "- [" << rule_form_name(r.form) << "] " << r.anchor << ": " << r.key
           << " -> " << r.value << "\n";
    return os.str();
}

RuleExtraction distill_episode(const std::string& gt_answer, const ReasoningLog& log,
                               const GroundTruthTrajectory& gt,
                               const ThresholdSchedule& schedule, ChatClient& llm,
                               Embedder& embedder, RuleStore& store) {
    const std::vector<double> series = deviation_series(log, gt);
    DeviationResult det = detect_deviations(series, schedule);
    attach_log_refs(det.events, log);
    const PseudocodeWorkflow workflow = extract_pseudocode(log, llm);
    RuleExtraction out =
        extract_rules(gt_answer, log, workflow, det.events, llm, embedder);
    for (const Rule& r : out.rules) store.add_rule(r);
    return out;
}

} // namespace himm

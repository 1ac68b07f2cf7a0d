#pragma once

// Rule distillation from finished episodes: find where a run deviated
// from the ground-truth path, summarize the run's control flow as
// pseudocode, extract anchored rules, and retrieve them later by
// question similarity.

#include <cstdint>
#include <string>
#include <vector>

#include "himm/cognitive_state.hpp"
#include "himm/geometry.hpp"
#include "himm/model_gateway.hpp"

namespace himm {

struct GroundTruthTrajectory {
    std::vector<Vec2> waypoints; // >= 2, consecutive waypoints distinct
};

struct TrajectoryPoint {
    int timestep = 0;
    Vec2 position;
    CognitiveState state = CognitiveState::Exploration;
    std::string image_ref;
};

struct DeviationEvent {
    int timestep = 0;
    double h_value = 0.0;        // > threshold_used
    double threshold_used = 0.0; // meters
    std::string image_ref;
};

struct LogEntry {
    TrajectoryPoint point;
    std::string summary; // one-line decision record
};

struct ReasoningLog {
    std::string episode_id;
    std::string instruction;
    std::vector<LogEntry> entries; // timesteps strictly increasing
};

struct PseudocodeWorkflow {
    std::vector<WorkflowSymbol> variables;
    std::vector<WorkflowSymbol> functions;
    std::vector<std::string> body;
};

struct Rule {
    RuleForm form = RuleForm::IfThen;
    std::string key;    // condition / situation / problem
    std::string value;  // consequence / suggestion / solution
    std::string anchor; // a declared workflow symbol
    std::string source_episode_id;
    std::vector<float> question_embedding; // unit norm
};

struct ThresholdSchedule {
    double s_hi = 2.0;  // meters
    double s_lo = 0.2;  // meters
    double step = 0.1;  // meters
    double p_stop = 0.5;
    uint64_t rng_seed = 0;
};

struct DeviationResult {
    double s_stop = 0.0;
    std::vector<DeviationEvent> events;
};

struct RuleExtraction {
    std::vector<Rule> rules;
    int dropped = 0; // rules discarded for failing anchor validation
};

// Throws ValidationError unless the trajectory has >= 2 waypoints, all
// finite, with consecutive waypoints distinct.
void validate_trajectory(const GroundTruthTrajectory& gt);

// Throws ValidationError unless entries are non-empty with strictly
// increasing timesteps.
void validate_log(const ReasoningLog& log);

// Minimum distance from each logged position to the ground-truth
// polyline, one value per entry, all >= 0.
std::vector<double> deviation_series(const ReasoningLog& log,
                                     const GroundTruthTrajectory& gt);

// Count of upward threshold crossings: t >= 1 with h_t > s and
// h_{t-1} <= s. Exposed for the detection sweep's tests.
int count_crossings(const std::vector<double>& series, double s);

// Sweeps the threshold from s_hi down to s_lo by step. The first
// threshold whose crossing count lands in [3,5] is accepted with
// probability p_stop (seeded); an unaccepted sweep falls back to the
// [3,5] threshold with count closest to 4 (tie: larger threshold), then
// to the threshold maximizing the count among counts <= 5, then to no
// events at all. Event timesteps index into the series; image refs are
// left empty. Pure in (series, schedule). Throws ConfigError on a
// malformed schedule, ValidationError when the series has < 2 values.
DeviationResult detect_deviations(const std::vector<double>& series,
                                  const ThresholdSchedule& schedule);

// Rewrites event timesteps from series indices to log timesteps and
// fills in the entries' image refs.
void attach_log_refs(std::vector<DeviationEvent>& events, const ReasoningLog& log);

// Checks that every identifier in every body line is a declared variable,
// a declared function, or a structural keyword; throws ValidationError
// naming the first offender.
PseudocodeWorkflow validate_workflow(const WorkflowParts& parts);

std::string render_log(const ReasoningLog& log);
std::string render_workflow(const PseudocodeWorkflow& wf);

// Asks the adjudicator to compress the log into a declared-symbol
// workflow. Malformed replies exhaust retries into ExtractionError; a
// well-formed reply that fails lexical validation throws ValidationError.
PseudocodeWorkflow extract_pseudocode(const ReasoningLog& log, ChatClient& llm);

// Shows the adjudicator the ground-truth answer, the log, the workflow
// and the deviation views, then parses its reply into rules. Rules whose
// anchor is not a declared symbol are dropped and counted. Question
// embeddings come from the episode's instruction text.
RuleExtraction extract_rules(const std::string& gt_answer, const ReasoningLog& log,
                             const PseudocodeWorkflow& workflow,
                             const std::vector<DeviationEvent>& events,
                             ChatClient& llm, Embedder& embedder);

// Append-only rule collection, single writer, read-concurrent.
class RuleStore {
public:
    explicit RuleStore(size_t dim = 384);

    size_t dim() const { return dim_; }
    size_t size() const { return rules_.size(); }
    bool empty() const { return rules_.empty(); }

    void add_rule(Rule rule);
    const std::vector<Rule>& rules() const { return rules_; }
    const std::vector<float>& embedding_matrix() const { return matrix_; }

private:
    size_t dim_;
    std::vector<Rule> rules_;
    std::vector<float> matrix_;
};

struct ScoredRule {
    Rule rule;
    double similarity = 0.0;
};

// Top-k stored rules by cosine between the question embedding and stored
// question embeddings, descending, ties by insertion order.
std::vector<ScoredRule> retrieve_rules(const RuleStore& store,
                                       const std::string& question,
                                       Embedder& embedder, size_t k);

// Canonical prompt rendering: one block per rule with anchor, form tag
// and key/value; byte-stable; empty input renders as the empty string.
std::string format_rules_for_prompt(const std::vector<Rule>& rules);

// Full distillation of one finished episode into the rule store.
// Returns the extraction outcome; detection runs before any model call.
RuleExtraction distill_episode(const std::string& gt_answer, const ReasoningLog& log,
                               const GroundTruthTrajectory& gt,
                               const ThresholdSchedule& schedule, ChatClient& llm,
                               Embedder& embedder, RuleStore& store);

} // namespace himm

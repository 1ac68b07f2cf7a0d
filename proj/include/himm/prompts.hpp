#pragma once

// Versioned prompt templates for every adjudicator call in the loop.
// Wording is part of the interface: scripted behaviors key off these
// strings, so changes here are format changes.

namespace himm::prompts {

inline constexpr const char* kGoalDecompositionSystem =
    "You split a navigation or question-answering instruction into goal "
    "components. Reply with one JSON object: {\"target\": \"<the single object "
    "the task is about>\", \"relative_objects\": [\"<objects mentioned as "
    "reference points>\"], \"relative_areas\": [\"<rooms or areas mentioned>\"]}. "
    "Reply with JSON only.";

inline constexpr const char* kLocalityCheckSystem =
    "You compare two first-person views from an indoor scene. Answer yes when "
    "both views plausibly come from nearby locations in the same place, "
    "otherwise answer no. Reply with a single word: yes or no.";

inline constexpr const char* kExploreDecisionSystem =
    "You are deciding whether an agent still needs to explore. You are given "
    "the task and views recalled from a past visit to this place. Answer yes "
    "if further exploration is required to solve the task, no if the recalled "
    "experience already covers it. Reply with a single word: yes or no.";

inline constexpr const char* kFrontierChoiceSystem =
    "You pick the most promising exploration frontier. You are given the task "
    "and a numbered list of frontiers with their map attributes. Reply with "
    "the number of the chosen frontier and nothing else.";

inline constexpr const char* kTargetVerifySystem =
    "You verify whether a candidate detection actually shows the requested "
    "target. You are given the task and the view that raised the candidate. "
    "Reply with a single word: yes or no.";

inline constexpr const char* kReadyCheckSystem =
    "You decide whether the agent has gathered enough evidence to answer its "
    "question. Reply with a single word: yes or no.";

inline constexpr const char* kAnswerSystem =
    "You answer the task question from the evidence gathered during the "
    "episode. Be concise and concrete. Reply with the answer only.";

inline constexpr const char* kPseudocodeSystem =
    "You turn an agent's reasoning log into a compact pseudocode workflow. "
    "Identify the variables and functions that govern the decisions, then "
    "write the control flow. Reply with one JSON object: {\"variables\": "
    "[{\"name\": ..., \"description\": ...}], \"functions\": [{\"name\": ..., "
    "\"description\": ...}], \"body\": [\"<one statement per line>\"]}. Body "
    "lines may only use declared variable and function names. JSON only.";

inline constexpr const char* kRuleExtractionSystem =
    "You distill reusable decision rules from a finished episode. You are "
    "given the ground-truth answer, the reasoning log, the pseudocode "
    "workflow, and the decision-deviation timesteps with their views. Write "
    "rules that would transfer to other environments. Reply with a JSON array "
    "of rules: [{\"form\": \"if_then\"|\"situation_suggestion\"|"
    "\"problem_solution\", \"key\": ..., \"value\": ..., \"anchor\": \"<one "
    "declared variable or function name>\"}]. JSON only.";

inline constexpr const char* kJudgeSystem =
    "You judge whether a proposed answer means the same thing as the "
    "reference answer for the given question. Reply with a single word: yes "
    "or no.";

} // namespace himm::prompts

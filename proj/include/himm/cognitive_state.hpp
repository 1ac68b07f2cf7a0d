#pragma once

#include <optional>
#include <string>

namespace himm {

// The four discrete modes the agent loop switches between.
enum class CognitiveState : int {
    Exploration = 0,
    TargetVerification = 1,
    TargetApproaching = 2,
    CheckReadyToAnswer = 3,
};

const char* cognitive_state_name(CognitiveState s);
std::optional<CognitiveState> parse_cognitive_state(const std::string& name);

} // namespace himm

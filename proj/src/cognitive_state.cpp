#include "himm/cognitive_state.hpp"

namespace himm {

const char* cognitive_state_name(CognitiveState s) {
    switch (s) {
        case CognitiveState::Exploration: return "Exploration";
        case CognitiveState::TargetVerification: return "TargetVerification";
        case CognitiveState::TargetApproaching: return "TargetApproaching";
        case CognitiveState::CheckReadyToAnswer: return "CheckReadyToAnswer";
    }
    return "Exploration";
}

std::optional<CognitiveState> parse_cognitive_state(const std::string& name) {
    for (CognitiveState s :
         {CognitiveState::Exploration, CognitiveState::TargetVerification,
          CognitiveState::TargetApproaching, CognitiveState::CheckReadyToAnswer})
        if (name == cognitive_state_name(s)) return s;
    return std::nullopt;
}

} // namespace himm

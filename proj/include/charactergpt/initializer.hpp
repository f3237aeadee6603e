#pragma once

#include <string>
#include <vector>

#include "charactergpt/cpt.hpp"

namespace charactergpt {

struct InitRequest {
    const CharacterCorpus& corpus;
    const PromptSet& prompts;
    Provider& provider;
    CptOptions options = {};
};

struct InitResult {
    InitPersona persona;
    PersonaSnapshot snapshot;  // epoch 0, init_block set, sections empty
    /// Chapter titles found verbatim in the init text, a hint that story
    /// progress leaked into the initialization persona.
    std::vector<std::string> warnings;
};

/// Builds the initialization persona from the character information
/// document: one extraction call per initialization trait. Nothing is
/// returned unless all five succeed with non-empty text.
InitResult initialize(const InitRequest& request);

}  // namespace charactergpt

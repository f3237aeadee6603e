#pragma once

#include <cstddef>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "charactergpt/clock.hpp"
#include "charactergpt/corpus.hpp"
#include "charactergpt/gateway.hpp"
#include "charactergpt/persona.hpp"
#include "charactergpt/prompts.hpp"

namespace charactergpt {

struct ToneProfile {
    CharacterId character_id;
    std::vector<std::string> exemplars;  // verbatim corpus dialogue lines
    std::optional<std::string> style_notes;

    bool empty() const noexcept { return exemplars.empty() && !style_notes; }
};

/// Picks up to `k` dialogue lines, longest first, ties broken by corpus order.
ToneProfile build_tone(const CharacterCorpus& corpus, std::size_t k = 20);

/// Renders the persona document as Markdown: the initialization block, then
/// the trained block (traits in canonical order, type_b entries tagged with
/// their epoch), then the tone block. Empty blocks are omitted.
AssembledPersona assemble(const PersonaSnapshot& snapshot, const ToneProfile& tone,
                          std::string_view display_name = {});

/// System prompt for in-character chat.
std::string render_inference_prompt(const PromptSet& prompts, const AssembledPersona& persona,
                                    std::string_view display_name, std::string_view language);

struct ChatOptions {
    double temperature = 0.7;
    int max_tokens = 4096;
    /// Upper bound on system prompt + history + utterance tokens. The oldest
    /// turns are dropped from the request first; the persona never is.
    std::size_t context_budget_tokens = 120000;
    const Tokenizer* tokenizer = nullptr;
};

/// An in-character conversation pinned to one snapshot epoch. respond() calls
/// are serialized per session; the history is append-only.
class ChatSession {
public:
    ChatSession(std::string id, AssembledPersona persona, std::string system_prompt,
                std::shared_ptr<const Clock> clock = system_clock());

    const std::string& id() const noexcept { return id_; }
    const CharacterId& character_id() const noexcept { return persona_.character_id; }
    int epoch() const noexcept { return persona_.epoch; }
    const AssembledPersona& persona() const noexcept { return persona_; }
    const std::string& system_prompt() const noexcept { return system_prompt_; }
    const std::string& created_at() const noexcept { return created_at_; }

    /// Sends the utterance with as much history as fits the budget and
    /// appends both turns on success. On failure the history is unchanged.
    std::string respond(std::string_view utterance, Provider& provider, const ChatOptions& options = {});

    std::vector<ChatMessage> history() const;
    /// One JSON object per line: a header record, then one record per turn.
    std::string transcript_jsonl() const;
    nlohmann::ordered_json to_json() const;

private:
    std::string id_;
    AssembledPersona persona_;
    std::string system_prompt_;
    std::string created_at_;
    mutable std::mutex mutex_;
    std::vector<ChatMessage> history_;
};

/// Convenience: assemble + render + construct.
std::shared_ptr<ChatSession> open_session(std::string session_id, const PersonaSnapshot& snapshot,
                                          const ToneProfile& tone, const PromptSet& prompts,
                                          std::string_view display_name, std::string_view language,
                                          std::shared_ptr<const Clock> clock = system_clock());

}  // namespace charactergpt

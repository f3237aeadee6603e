#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "charactergpt/clock.hpp"
#include "charactergpt/gateway.hpp"
#include "charactergpt/inference.hpp"
#include "charactergpt/persona.hpp"

namespace charactergpt::eval {

/// Sent verbatim to the character, which has the persona document as its
/// system prompt.
inline constexpr std::string_view kStoryPrompt =
    "Based on the given text file, imagine an engaging and specific future episode about what will happen to "
    "you, and write it as a novel of approximately 2000 words.";

inline constexpr int kStoryWordTarget = 2000;

struct StoryTask {
    std::string story_id;  // <character>-e<epoch>-s<k>
    CharacterId character_id;
    int epoch = 0;
    std::string prompt;
    int word_target = kStoryWordTarget;
    std::string story{};
    std::size_t word_count = 0;
    std::string model{};
    std::string created_at{};
    std::optional<std::string> error{};  // set when the provider failed for this story

    bool ok() const noexcept { return !error.has_value(); }
};

nlohmann::ordered_json to_json(const StoryTask& task);

std::string story_id(const CharacterId& id, int epoch, int k);

/// Whitespace-separated word count.
std::size_t count_words(std::string_view text);

/// Builds a fresh session for story k (1-based). Every story gets its own
/// conversation so earlier stories never leak into later ones.
using SessionFactory = std::function<std::shared_ptr<ChatSession>(int k)>;

/// Generates n stories. A provider failure is recorded on that story and the
/// remaining stories still run.
std::vector<StoryTask> run_story_task(const SessionFactory& factory, Provider& provider,
                                      const CharacterId& character_id, int epoch, int n_stories,
                                      const ChatOptions& options = {},
                                      std::shared_ptr<const Clock> clock = system_clock());

}  // namespace charactergpt::eval

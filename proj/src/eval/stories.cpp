#include "charactergpt/eval/stories.hpp"

#include <cctype>

#include "charactergpt/error.hpp"

namespace charactergpt::eval {

std::string story_id(const CharacterId& id, int epoch, int k) {
    return id.str() + "-e" + std::to_string(epoch) + "-s" + std::to_string(k);
}

std::size_t count_words(std::string_view text) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        const bool space = std::isspace(c) != 0;
        if (!space && !in_word) ++n;
        in_word = !space;
    }
    return n;
}

nlohmann::ordered_json to_json(const StoryTask& task) {
    nlohmann::ordered_json j;
    j["story_id"] = task.story_id;
    j["character_id"] = task.character_id.str();
    j["epoch"] = task.epoch;
    j["prompt"] = task.prompt;
    j["word_target"] = task.word_target;
    j["word_count"] = task.word_count;
    j["model"] = task.model;
    j["created_at"] = task.created_at;
    j["story"] = task.story;
    if (task.error) j["error"] = *task.error;
    return j;
}

std::vector<StoryTask> run_story_task(const SessionFactory& factory, Provider& provider,
                                      const CharacterId& character_id, int epoch, int n_stories,
                                      const ChatOptions& options, std::shared_ptr<const Clock> clock) {
    if (n_stories < 0) fail(ErrorKind::validation, "story count must be non-negative");
    std::vector<StoryTask> out;
    for (int k = 1; k <= n_stories; ++k) {
        StoryTask task{.story_id = story_id(character_id, epoch, k),
                       .character_id = character_id,
                       .epoch = epoch,
                       .prompt = std::string(kStoryPrompt)};
        task.model = provider.model_id();
        task.created_at = format_utc(clock->now());
        try {
            auto session = factory(k);
            if (session->epoch() != epoch || session->character_id() != character_id) {
                fail(ErrorKind::internal, "session factory returned a session for the wrong persona");
            }
            task.story = session->respond(kStoryPrompt, provider, options);
            task.word_count = count_words(task.story);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::transport && e.kind() != ErrorKind::protocol) throw;
            task.error = e.what();
        }
        out.push_back(std::move(task));
    }
    return out;
}

}  // namespace charactergpt::eval

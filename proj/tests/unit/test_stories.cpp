#include <doctest.h>

#include "charactergpt/error.hpp"
#include "charactergpt/eval/stories.hpp"
#include "charactergpt/initializer.hpp"
#include "support.hpp"

using namespace charactergpt;
using namespace charactergpt::eval;

namespace {

struct Setup {
    PromptSet prompts = PromptSet::load(testsupport::prompts_dir());
    CharacterCorpus corpus = testsupport::synthetic_corpus("story", 1);
    PersonaSnapshot snapshot = empty_snapshot(CharacterId("story"));

    Setup() {
        auto mock = testsupport::pipeline_mock();
        snapshot = initialize({corpus, prompts, *mock}).snapshot;
    }

    SessionFactory factory() {
        return [this](int k) {
            return open_session("story-" + std::to_string(k), snapshot, ToneProfile{snapshot.character_id, {}, std::nullopt}, prompts, corpus.display_name, "en",
                                fixed_clock());
        };
    }
};

}  // namespace

TEST_SUITE("stories") {

TEST_CASE("prompt is sent verbatim, one fresh session per story") {
    Setup s;
    auto mock = testsupport::pipeline_mock();
    const auto tasks = run_story_task(s.factory(), *mock, s.corpus.character_id, 0, 3, {}, fixed_clock());
    REQUIRE(tasks.size() == 3);
    const auto log = mock->call_log();
    REQUIRE(log.size() == 3);
    for (const auto& r : log) {
        REQUIRE(r.messages.size() == 1);
        CHECK(r.messages[0].text == std::string(kStoryPrompt));
    }
    CHECK(tasks[0].story_id == "story-e0-s1");
    CHECK(tasks[2].story_id == "story-e0-s3");
    CHECK(tasks[1].prompt == std::string(kStoryPrompt));
    CHECK(tasks[1].word_target == 2000);
    CHECK(tasks[1].ok());
    CHECK(tasks[1].word_count == count_words(tasks[1].story));
    CHECK(tasks[1].model == "mock");
    CHECK(tasks[1].created_at == "1970-01-01T00:00:00.000Z");
    CHECK(to_json(tasks[0])["story_id"] == "story-e0-s1");
}

TEST_CASE("zero stories makes no calls") {
    Setup s;
    auto mock = testsupport::pipeline_mock();
    CHECK(run_story_task(s.factory(), *mock, s.corpus.character_id, 0, 0).empty());
    CHECK(mock->call_log().empty());
    CHECK_THROWS_AS(run_story_task(s.factory(), *mock, s.corpus.character_id, 0, -1), Error);
}

TEST_CASE("a failed story is recorded and the rest still run") {
    Setup s;
    int calls = 0;
    MockProvider flaky({}, [&calls](const CompletionRequest&, const std::string&) -> std::string {
        if (++calls == 2) fail(ErrorKind::transport, "timeout");
        return "Once upon a time.";
    });
    const auto tasks = run_story_task(s.factory(), flaky, s.corpus.character_id, 0, 3, {}, fixed_clock());
    REQUIRE(tasks.size() == 3);
    CHECK(tasks[0].ok());
    CHECK_FALSE(tasks[1].ok());
    CHECK(tasks[1].error->find("timeout") != std::string::npos);
    CHECK(tasks[2].story == "Once upon a time.");
    CHECK(to_json(tasks[1]).contains("error"));
}

TEST_CASE("word counting") {
    CHECK(count_words("") == 0);
    CHECK(count_words("  one\ttwo\nthree  ") == 3);
    CHECK(count_words("hyphen-ated words, punctuation!") == 3);
    CHECK(story_id(CharacterId("wren"), 12, 4) == "wren-e12-s4");
}

}

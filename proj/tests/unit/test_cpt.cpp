#include <doctest.h>

#include "charactergpt/cpt.hpp"
#include "charactergpt/error.hpp"
#include "charactergpt/initializer.hpp"
#include "charactergpt/store.hpp"
#include "support.hpp"

using namespace charactergpt;

namespace {

struct Fixture {
    PromptSet prompts = PromptSet::load(testsupport::prompts_dir());
    CharacterCorpus corpus = testsupport::synthetic_corpus("cpt", 4);
    CptOptions options;

    Fixture() { options.clock = fixed_clock(); }

    PersonaSnapshot init(Provider& p) { return initialize({corpus, prompts, p, options}).snapshot; }
};

bool is_generalization(const CompletionRequest& r) { return !r.attachment && r.system_prompt.empty(); }

/// Throws a transport error for one trait's extraction; everything else
/// follows the pipeline responder.
Responder failing_on(std::string trait_display) {
    auto inner = testsupport::pipeline_responder();
    return [inner, trait_display](const CompletionRequest& r, const std::string& fp) {
        if (r.attachment && r.messages.front().text.find("Trait: " + trait_display + "\n") != std::string::npos &&
            r.messages.front().text.find("summary of chapter") != std::string::npos) {
            fail(ErrorKind::transport, "simulated outage");
        }
        return inner(r, fp);
    };
}

}  // namespace

TEST_SUITE("cpt") {

TEST_CASE("normalize_extraction maps the sentinel to empty") {
    CHECK(normalize_extraction("NONE").empty());
    CHECK(normalize_extraction("  none.\n").empty());
    CHECK(normalize_extraction("None").empty());
    CHECK(normalize_extraction("").empty());
    CHECK(normalize_extraction("Nonetheless she smiled.") == "Nonetheless she smiled.");
    CHECK(normalize_extraction("  kept  ") == "kept");
}

TEST_CASE("one epoch: type_a replaced, type_b appended, eleven calls") {
    Fixture f;
    auto mock = testsupport::pipeline_mock();
    const auto s0 = f.init(*mock);
    mock->clear_call_log();

    const auto r1 = train_epoch(s0, f.corpus.chapter(1), f.corpus, f.prompts, *mock, f.options);
    const auto calls = mock->call_log();
    CHECK(calls.size() == 8 + 3);
    CHECK(std::count_if(calls.begin(), calls.end(), is_generalization) == 3);
    CHECK(r1.snapshot.epoch == 1);
    CHECK(r1.outcomes.size() == 8);
    for (auto k : kAllTraits) {
        const auto& sec = r1.snapshot.section(k);
        REQUIRE(sec.entries.size() == 1);
        CHECK(sec.entries[0].epoch == 1);
        CHECK(sec.entries[0].source_chapter_id == "ch001");
        CHECK(sec.entries[0].token_count == default_tokenizer().count(sec.entries[0].content));
        if (kind_of(k) == TraitKind::type_b) CHECK(sec.entries[0].content.find("chapmark-1") != std::string::npos);
    }
    CHECK(r1.snapshot.init_block == s0.init_block);

    mock->clear_call_log();
    const auto r2 = train_epoch(r1.snapshot, f.corpus.chapter(2), f.corpus, f.prompts, *mock, f.options);
    for (auto k : kAllTraits) {
        const auto& before = r1.snapshot.section(k).entries;
        const auto& after = r2.snapshot.section(k).entries;
        if (kind_of(k) == TraitKind::type_b) {
            REQUIRE(after.size() == 2);
            CHECK(after[0] == before[0]);
            CHECK(after[1].epoch == 2);
        } else {
            REQUIRE(after.size() == 1);
            CHECK(after[0].epoch == 2);
        }
    }
    // The generalization call sees the prior type_a text.
    const auto log = mock->call_log();
    const std::string prior = r1.snapshot.section(TraitKey::personality).entries[0].content;
    CHECK(std::any_of(log.begin(), log.end(), [&](const CompletionRequest& r) {
        return is_generalization(r) && r.messages[0].text.find(prior) != std::string::npos;
    }));
}

TEST_CASE("empty extractions skip generalization and leave sections alone") {
    Fixture f;
    auto init_mock = testsupport::pipeline_mock();
    const auto s0 = f.init(*init_mock);
    auto mock = testsupport::pipeline_mock(0, 1.0);
    const auto r = train_epoch(s0, f.corpus.chapter(1), f.corpus, f.prompts, *mock, f.options);
    CHECK(mock->call_log().size() == 8);
    for (auto k : kAllTraits) CHECK(r.snapshot.section(k).entries.empty());
    for (const auto& o : r.outcomes) CHECK(o.status == TraitStatus::empty);
}

TEST_CASE("epoch preconditions") {
    Fixture f;
    auto mock = testsupport::pipeline_mock();
    const auto s0 = f.init(*mock);
    try {
        train_epoch(s0, f.corpus.chapter(2), f.corpus, f.prompts, *mock, f.options);
        FAIL("expected precondition");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::precondition);
    }
    auto bare = empty_snapshot(f.corpus.character_id);
    CHECK_THROWS_AS(train_epoch(bare, f.corpus.chapter(1), f.corpus, f.prompts, *mock, f.options), Error);
}

TEST_CASE("a failing trait aborts the epoch and leaves the input untouched") {
    Fixture f;
    auto ok = testsupport::pipeline_mock();
    const auto s0 = f.init(*ok);
    const auto copy = s0;
    MockProvider bad({}, failing_on("Emotions"));
    try {
        train_epoch(s0, f.corpus.chapter(1), f.corpus, f.prompts, bad, f.options);
        FAIL("expected EpochError");
    } catch (const EpochError& e) {
        CHECK(e.kind() == ErrorKind::transport);
        CHECK(e.epoch() == 1);
        CHECK(e.trait() == TraitKey::emotions);
        CHECK(e.outcomes().size() == 8);
        CHECK(e.details().at("trait") == "emotions");
    }
    CHECK(s0 == copy);
}

TEST_CASE("generalize_trait contract") {
    Fixture f;
    auto mock = testsupport::pipeline_mock();
    auto kind = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::internal;
    };
    CHECK(kind([&] { generalize_trait(*mock, f.prompts, std::nullopt, "x", TraitKey::backstory, f.corpus); }) ==
          ErrorKind::precondition);
    CHECK(kind([&] { generalize_trait(*mock, f.prompts, std::nullopt, "  ", TraitKey::personality, f.corpus); }) ==
          ErrorKind::precondition);
    MockProvider blank({}, [](const CompletionRequest&, const std::string&) { return std::string("  "); });
    CHECK(kind([&] { generalize_trait(blank, f.prompts, "prior", "new", TraitKey::personality, f.corpus); }) ==
          ErrorKind::validation);
    const auto text = generalize_trait(*mock, f.prompts, std::nullopt, "brave", TraitKey::motivations, f.corpus);
    CHECK_FALSE(text.empty());
    const auto req = build_generalization_request(f.prompts, f.corpus, TraitKey::motivations, std::nullopt, "brave", {});
    CHECK(req.messages[0].text.find("(none yet)") != std::string::npos);
}

TEST_CASE("extraction request carries the chapter as attachment and the sampling params") {
    Fixture f;
    CallParams params{0.2, 512};
    const auto r = build_extraction_request(f.prompts, f.corpus, TraitKey::conflict, "summary of chapter 3 (x)",
                                            f.corpus.chapter(3).body, params);
    CHECK(r.attachment == f.corpus.chapter(3).body);
    CHECK(r.temperature == doctest::Approx(0.2));
    CHECK(r.max_tokens == 512);
    CHECK(r.messages[0].text.find("Trait: Conflict") != std::string::npos);
    CHECK(r.messages[0].text.find(f.corpus.display_name) != std::string::npos);
}

TEST_CASE("train persists every epoch and honours resume rules") {
    Fixture f;
    testsupport::TempDir tmp;
    PersonaStore store(tmp.path(), f.prompts.lineage(), fixed_clock());
    auto mock = testsupport::pipeline_mock(3, 0.3);
    auto kind = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::internal;
    };
    CHECK(kind([&] { train(f.corpus, f.prompts, *mock, store); }) == ErrorKind::precondition);
    store.put_snapshot(f.init(*testsupport::pipeline_mock()));

    std::vector<int> seen;
    const auto run = train(f.corpus, f.prompts, *mock, store, std::nullopt, f.options,
                           [&](const EpochResult& r) { seen.push_back(r.snapshot.epoch); });
    CHECK(run.ok());
    CHECK(run.completed_epochs == std::vector<int>{1, 2, 3, 4});
    CHECK(seen == run.completed_epochs);
    CHECK(store.head(f.corpus.character_id) == 4);
    CHECK(store.read_runlog(f.corpus.character_id).size() == 4 * 8);

    CHECK(kind([&] { train(f.corpus, f.prompts, *mock, store); }) == ErrorKind::precondition);
    CHECK(kind([&] { train(f.corpus, f.prompts, *mock, store, 2); }) == ErrorKind::conflict);
}

TEST_CASE("a failed run keeps completed epochs and can be resumed") {
    Fixture f;
    testsupport::TempDir tmp;
    PersonaStore store(tmp.path(), f.prompts.lineage(), fixed_clock());
    auto good = testsupport::pipeline_mock();
    store.put_snapshot(f.init(*good));

    // Fails only on chapter 3.
    auto inner = testsupport::pipeline_responder();
    MockProvider flaky({}, [inner](const CompletionRequest& r, const std::string& fp) {
        if (r.attachment && r.attachment->find("chapmark-3") != std::string::npos) fail(ErrorKind::transport, "down");
        return inner(r, fp);
    });
    const auto run = train(f.corpus, f.prompts, flaky, store, std::nullopt, f.options);
    CHECK_FALSE(run.ok());
    CHECK(run.failure->epoch == 3);
    CHECK(run.failure->kind == ErrorKind::transport);
    CHECK(run.completed_epochs == std::vector<int>{1, 2});
    CHECK(store.head(f.corpus.character_id) == 2);
    const auto log = store.read_runlog(f.corpus.character_id);
    CHECK(std::any_of(log.begin(), log.end(), [](const nlohmann::json& j) { return j["status"] == "failed"; }));

    CHECK_THROWS_AS(train(f.corpus, f.prompts, *good, store, 4), Error);
    const auto resumed = train(f.corpus, f.prompts, *good, store, 3, f.options);
    CHECK(resumed.ok());
    CHECK(resumed.completed_epochs == std::vector<int>{3, 4});
    CHECK(store.list_epochs(f.corpus.character_id).size() == 5);
}

TEST_CASE("sequential and parallel epochs agree") {
    Fixture f;
    auto mock = testsupport::pipeline_mock(9, 0.4);
    const auto s0 = f.init(*testsupport::pipeline_mock());
    auto seq = f.options;
    seq.parallel = false;
    const auto a = train_epoch(s0, f.corpus.chapter(1), f.corpus, f.prompts, *mock, f.options);
    const auto b = train_epoch(s0, f.corpus.chapter(1), f.corpus, f.prompts, *mock, seq);
    CHECK(a.snapshot == b.snapshot);
}

TEST_CASE("provider fingerprint names model, prompts and parameters") {
    Fixture f;
    MockProvider mock;
    CHECK(provider_fingerprint(mock, f.prompts, f.options) ==
          "mock|prompts=" + f.prompts.lineage() + "|extract=t0.7/4096|generalize=t0.7/4096");
}

}

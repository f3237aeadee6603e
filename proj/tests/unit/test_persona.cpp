#include <doctest.h>

#include <random>

#include "charactergpt/error.hpp"
#include "charactergpt/persona.hpp"
#include "support.hpp"

using namespace charactergpt;

namespace {

ErrorKind kind_of_failure(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an Error");
    return ErrorKind::internal;
}

}  // namespace

TEST_SUITE("persona") {

TEST_CASE("trait classification") {
    CHECK(kind_of(TraitKey::personality) == TraitKind::type_a);
    CHECK(kind_of(TraitKey::physical_description) == TraitKind::type_a);
    CHECK(kind_of(TraitKey::motivations) == TraitKind::type_a);
    for (auto k : {TraitKey::backstory, TraitKey::emotions, TraitKey::relationships, TraitKey::growth_and_change,
                   TraitKey::conflict}) {
        CHECK(kind_of(k) == TraitKind::type_b);
    }
    CHECK(kAllTraits.size() == 8);
    CHECK_FALSE(is_init_trait(TraitKey::emotions));
    CHECK_FALSE(is_init_trait(TraitKey::growth_and_change));
    CHECK_FALSE(is_init_trait(TraitKey::conflict));
    CHECK(is_init_trait(TraitKey::relationships));
    for (auto k : kAllTraits) {
        CHECK(parse_trait_key(to_string(k)) == k);
        CHECK_FALSE(definition(k).empty());
    }
    CHECK(display_name(TraitKey::growth_and_change) == "Growth and Change");
    CHECK_FALSE(parse_trait_key("voice").has_value());
}

TEST_CASE("character ids are validated") {
    CHECK(CharacterId("hitori_gotoh-2").str() == "hitori_gotoh-2");
    CHECK(kind_of_failure([] { CharacterId(""); }) == ErrorKind::validation);
    CHECK(kind_of_failure([] { CharacterId("../etc"); }) == ErrorKind::validation);
    CHECK(kind_of_failure([] { CharacterId("a b"); }) == ErrorKind::validation);
    CHECK(kind_of_failure([] { CharacterId(std::string(65, 'a')); }) == ErrorKind::validation);
    CHECK_NOTHROW(CharacterId(std::string(64, 'a')));
}

TEST_CASE("type_b sections append in epoch order") {
    TraitSection s(TraitKey::relationships);
    s.append({1, "met Tam", "ch001", 2});
    s.append({3, "argued with Tam", "ch003", 3});
    CHECK(s.entries.size() == 2);
    CHECK(kind_of_failure([&] { s.append({2, "late", "ch002", 1}); }) == ErrorKind::precondition);
    CHECK(kind_of_failure([&] { s.append({3, "again", "ch003", 1}); }) == ErrorKind::conflict);
    CHECK(kind_of_failure([&] { s.append({4, "", "ch004", 0}); }) == ErrorKind::validation);
    CHECK(kind_of_failure([&] { s.replace({4, "x", "ch004", 1}); }) == ErrorKind::precondition);
}

TEST_CASE("type_a sections keep one entry") {
    TraitSection s(TraitKey::personality);
    s.replace({1, "shy", "ch001", 1});
    s.replace({2, "shy but brave", "ch002", 3});
    REQUIRE(s.entries.size() == 1);
    CHECK(s.entries[0].content == "shy but brave");
    CHECK(kind_of_failure([&] { s.append({3, "x", "ch003", 1}); }) == ErrorKind::precondition);
}

TEST_CASE("init persona accepts only the five init traits") {
    InitPersona p;
    CHECK(kind_of_failure([&] { p.set(TraitKey::emotions, "x"); }) == ErrorKind::validation);
    CHECK(kind_of_failure([&] { p.set(TraitKey::conflict, "x"); }) == ErrorKind::validation);
    for (auto k : kInitTraits) p.set(k, "text");
    CHECK(p.complete());
    p.set(TraitKey::backstory, "");
    CHECK_FALSE(p.complete());
    CHECK(kind_of_failure([&] { (void)InitPersona().at(TraitKey::personality); }) == ErrorKind::not_found);
}

TEST_CASE("snapshot validation") {
    auto s = empty_snapshot(CharacterId("c"));
    CHECK_NOTHROW(s.validate());
    s.epoch = 2;
    s.section(TraitKey::emotions).append({3, "from the future", "ch003", 1});
    CHECK(kind_of_failure([&] { s.validate(); }) == ErrorKind::validation);

    auto t = empty_snapshot(CharacterId("c"));
    t.sections.erase(TraitKey::conflict);
    CHECK(kind_of_failure([&] { t.validate(); }) == ErrorKind::validation);

    auto u = empty_snapshot(CharacterId("c"));
    InitPersona partial;
    partial.set(TraitKey::personality, "x");
    u.init_block = partial;
    CHECK(kind_of_failure([&] { u.validate(); }) == ErrorKind::validation);
}

TEST_CASE("snapshot JSON round trip on 200 random snapshots") {
    std::mt19937_64 rng(20240501);
    for (int i = 0; i < 200; ++i) {
        const auto s = testsupport::random_snapshot(rng);
        REQUIRE_NOTHROW(s.validate());
        const std::string text = to_json(s).dump();
        const auto back = snapshot_from_json(nlohmann::json::parse(text));
        CHECK(back == s);
        CHECK(to_json(back).dump() == text);
    }
}

TEST_CASE("snapshot JSON carries the schema version first and rejects other versions") {
    auto s = empty_snapshot(CharacterId("c"));
    auto j = to_json(s);
    CHECK(j.begin().key() == "schema_version");
    CHECK(j["schema_version"] == kSnapshotSchemaVersion);
    nlohmann::json bad = j;
    bad["schema_version"] = 99;
    CHECK(kind_of_failure([&] { snapshot_from_json(bad); }) == ErrorKind::validation);
    nlohmann::json missing = j;
    missing["sections"].erase("conflict");
    CHECK(kind_of_failure([&] { snapshot_from_json(missing); }) == ErrorKind::validation);
}

TEST_CASE("section token totals add init text and entry counts") {
    auto s = empty_snapshot(CharacterId("c"));
    s.epoch = 2;
    InitPersona init;
    for (auto k : kInitTraits) init.set(k, "one two three");
    s.init_block = init;
    s.section(TraitKey::relationships).append({1, "a", "ch001", 5});
    s.section(TraitKey::relationships).append({2, "b", "ch002", 7});
    s.section(TraitKey::emotions).append({2, "c", "ch002", 4});
    const auto totals = section_token_totals(s);
    CHECK(totals.at(TraitKey::relationships) == 3 + 5 + 7);
    CHECK(totals.at(TraitKey::emotions) == 4);
    CHECK(totals.at(TraitKey::personality) == 3);
    CHECK(totals.at(TraitKey::conflict) == 0);
}

TEST_CASE("simple tokenizer counts word runs and punctuation") {
    const auto& tok = default_tokenizer();
    CHECK(tok.count("") == 0);
    CHECK(tok.count("hello world") == 2);
    CHECK(tok.count("Hello, world!") == 4);
    CHECK(tok.count("snake_case words") == 2);
    CHECK(tok.count("café") == 1);
}

}

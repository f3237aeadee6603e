#include "charactergpt/persona.hpp"

#include <algorithm>

#include "charactergpt/error.hpp"

namespace charactergpt {

namespace {

struct TraitInfo {
    TraitKey key;
    std::string_view name;
    std::string_view display;
    std::string_view definition;
};

constexpr std::array<TraitInfo, 8> kTraitInfo = {{
    {TraitKey::personality, "personality", "Personality",
     "The character's defining temperament and habits of mind, such as courage, shyness or humor."},
    {TraitKey::physical_description, "physical_description", "Physical Description",
     "How the character looks: build, face, clothing and distinguishing features."},
    {TraitKey::motivations, "motivations", "Motivations",
     "What the character wants and what drives them to act."},
    {TraitKey::backstory, "backstory", "Backstory",
     "Past events and history that shaped who the character is."},
    {TraitKey::emotions, "emotions", "Emotions",
     "The feelings the character shows and how those feelings color their reactions."},
    {TraitKey::relationships, "relationships", "Relationships",
     "The people the character deals with and how each of those ties stands."},
    {TraitKey::growth_and_change, "growth_and_change", "Growth and Change",
     "How the character develops as the story moves forward."},
    {TraitKey::conflict, "conflict", "Conflict",
     "Internal struggles and external obstacles the character faces."},
}};

const TraitInfo& info(TraitKey key) {
    return kTraitInfo[static_cast<std::size_t>(key)];
}

bool valid_id_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
           c == '-';
}

}  // namespace

std::string_view to_string(TraitKey key) noexcept { return info(key).name; }
std::string_view display_name(TraitKey key) noexcept { return info(key).display; }
std::string_view definition(TraitKey key) noexcept { return info(key).definition; }

std::string_view to_string(TraitKind kind) noexcept {
    return kind == TraitKind::type_a ? "type_a" : "type_b";
}

std::optional<TraitKey> parse_trait_key(std::string_view name) noexcept {
    for (const auto& t : kTraitInfo) {
        if (t.name == name) return t.key;
    }
    return std::nullopt;
}

std::optional<TraitKind> parse_trait_kind(std::string_view name) noexcept {
    if (name == "type_a") return TraitKind::type_a;
    if (name == "type_b") return TraitKind::type_b;
    return std::nullopt;
}

std::string_view to_string(PersonaBlock block) noexcept {
    switch (block) {
        case PersonaBlock::init: return "init";
        case PersonaBlock::train: return "train";
        case PersonaBlock::tone: return "tone";
    }
    return "init";
}

CharacterId::CharacterId(std::string value) : value_(std::move(value)) {
    if (value_.empty()) fail(ErrorKind::validation, "character id must not be empty");
    if (value_.size() > 64) fail(ErrorKind::validation, "character id longer than 64 bytes: " + value_);
    if (!std::all_of(value_.begin(), value_.end(), valid_id_char)) {
        fail(ErrorKind::validation, "character id may only contain [A-Za-z0-9_-]: " + value_);
    }
}

void TraitSection::append(TraitEntry entry) {
    if (kind != TraitKind::type_b) {
        fail(ErrorKind::precondition, "append on type_a section " + std::string(to_string(key)));
    }
    if (entry.content.empty()) fail(ErrorKind::validation, "trait entry content is empty");
    for (const auto& e : entries) {
        if (e.epoch == entry.epoch && e.source_chapter_id == entry.source_chapter_id) {
            fail(ErrorKind::conflict, "duplicate entry for epoch " + std::to_string(entry.epoch) +
                                          " in section " + std::string(to_string(key)));
        }
    }
    if (!entries.empty() && entries.back().epoch > entry.epoch) {
        fail(ErrorKind::precondition, "entries must be appended in epoch order");
    }
    entries.push_back(std::move(entry));
}

void TraitSection::replace(TraitEntry entry) {
    if (kind != TraitKind::type_a) {
        fail(ErrorKind::precondition, "replace on type_b section " + std::string(to_string(key)));
    }
    if (entry.content.empty()) fail(ErrorKind::validation, "trait entry content is empty");
    entries.assign(1, std::move(entry));
}

void TraitSection::validate() const {
    const std::string name(to_string(key));
    if (kind != kind_of(key)) fail(ErrorKind::validation, "section " + name + " has the wrong kind");
    for (const auto& e : entries) {
        if (e.content.empty()) fail(ErrorKind::validation, "empty entry in section " + name);
        if (e.epoch < 0) fail(ErrorKind::validation, "negative epoch in section " + name);
    }
    if (kind == TraitKind::type_a) {
        if (entries.size() > 1) fail(ErrorKind::validation, "type_a section " + name + " holds more than one entry");
        return;
    }
    for (std::size_t i = 1; i < entries.size(); ++i) {
        const auto& prev = entries[i - 1];
        const auto& cur = entries[i];
        if (cur.epoch < prev.epoch) fail(ErrorKind::validation, "section " + name + " is not in epoch order");
        for (std::size_t j = 0; j < i; ++j) {
            if (entries[j].epoch == cur.epoch && entries[j].source_chapter_id == cur.source_chapter_id) {
                fail(ErrorKind::validation, "section " + name + " repeats an (epoch, chapter) pair");
            }
        }
    }
}

void InitPersona::set(TraitKey key, std::string text) {
    if (!is_init_trait(key)) {
        fail(ErrorKind::validation,
             "trait " + std::string(to_string(key)) + " is not part of the initialization persona");
    }
    texts_[key] = std::move(text);
}

const std::string& InitPersona::at(TraitKey key) const {
    auto it = texts_.find(key);
    if (it == texts_.end()) {
        fail(ErrorKind::not_found, "initialization persona has no " + std::string(to_string(key)));
    }
    return it->second;
}

bool InitPersona::complete() const {
    return std::all_of(kInitTraits.begin(), kInitTraits.end(), [this](TraitKey k) {
        auto it = texts_.find(k);
        return it != texts_.end() && !it->second.empty();
    });
}

void PersonaSnapshot::validate() const {
    if (epoch < 0) fail(ErrorKind::validation, "snapshot epoch is negative");
    for (auto key : kAllTraits) {
        auto it = sections.find(key);
        if (it == sections.end()) {
            fail(ErrorKind::validation, "snapshot is missing section " + std::string(to_string(key)));
        }
        if (it->second.key != key) fail(ErrorKind::validation, "section keyed under the wrong trait");
        it->second.validate();
        for (const auto& e : it->second.entries) {
            if (e.epoch > epoch || e.epoch < 1) {
                fail(ErrorKind::validation, "section " + std::string(to_string(key)) + " holds an entry from epoch " +
                                                std::to_string(e.epoch) + " in snapshot " + std::to_string(epoch));
            }
        }
    }
    if (sections.size() != kAllTraits.size()) fail(ErrorKind::validation, "snapshot has extra sections");
    if (init_block && !init_block->complete()) {
        fail(ErrorKind::validation, "snapshot init block is incomplete");
    }
}

PersonaSnapshot empty_snapshot(const CharacterId& character_id) {
    PersonaSnapshot s{character_id, 0, std::nullopt, {}, {}, {}};
    for (auto key : kAllTraits) s.sections.emplace(key, TraitSection(key));
    return s;
}

std::map<TraitKey, std::size_t> section_token_totals(const PersonaSnapshot& snapshot, const Tokenizer& tokenizer) {
    std::map<TraitKey, std::size_t> totals;
    for (auto key : kAllTraits) {
        std::size_t n = 0;
        if (auto it = snapshot.sections.find(key); it != snapshot.sections.end()) {
            for (const auto& e : it->second.entries) n += e.token_count;
        }
        if (snapshot.init_block && snapshot.init_block->contains(key)) {
            n += tokenizer.count(snapshot.init_block->at(key));
        }
        totals[key] = n;
    }
    return totals;
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::ordered_json to_json(const TraitEntry& entry) {
    return {{"epoch", entry.epoch},
            {"content", entry.content},
            {"source_chapter_id", entry.source_chapter_id},
            {"token_count", entry.token_count}};
}

nlohmann::ordered_json to_json(const TraitSection& section) {
    auto entries = nlohmann::ordered_json::array();
    for (const auto& e : section.entries) entries.push_back(to_json(e));
    return {{"key", to_string(section.key)}, {"kind", to_string(section.kind)}, {"entries", std::move(entries)}};
}

nlohmann::ordered_json to_json(const InitPersona& init) {
    nlohmann::ordered_json out = nlohmann::ordered_json::object();
    for (auto key : kInitTraits) {
        if (init.contains(key)) out[std::string(to_string(key))] = init.at(key);
    }
    return out;
}

nlohmann::ordered_json to_json(const PersonaSnapshot& s) {
    nlohmann::ordered_json sections = nlohmann::ordered_json::object();
    for (auto key : kAllTraits) sections[std::string(to_string(key))] = to_json(s.section(key));
    return {{"schema_version", kSnapshotSchemaVersion},
            {"character_id", s.character_id.str()},
            {"epoch", s.epoch},
            {"init_block", s.init_block ? to_json(*s.init_block) : nlohmann::ordered_json(nullptr)},
            {"sections", std::move(sections)},
            {"created_at", s.created_at},
            {"provider_fingerprint", s.provider_fingerprint}};
}

nlohmann::ordered_json to_json(const AssembledPersona& p) {
    auto offsets = nlohmann::ordered_json::array();
    for (const auto& span : p.section_offsets) {
        offsets.push_back({{"block", to_string(span.block)},
                           {"key", span.key ? nlohmann::ordered_json(to_string(*span.key)) : nlohmann::ordered_json(nullptr)},
                           {"start", span.start},
                           {"end", span.end}});
    }
    return {{"character_id", p.character_id.str()},
            {"epoch", p.epoch},
            {"body", p.body},
            {"tone", p.tone ? nlohmann::ordered_json(*p.tone) : nlohmann::ordered_json(nullptr)},
            {"section_offsets", std::move(offsets)}};
}

namespace {

TraitKey require_trait(const std::string& name) {
    auto key = parse_trait_key(name);
    if (!key) fail(ErrorKind::validation, "unknown trait key '" + name + "'");
    return *key;
}

}  // namespace

PersonaSnapshot snapshot_from_json(const nlohmann::json& doc) {
    try {
        const int version = doc.at("schema_version").get<int>();
        if (version != kSnapshotSchemaVersion) {
            fail(ErrorKind::validation, "unsupported snapshot schema_version " + std::to_string(version));
        }
        PersonaSnapshot s = empty_snapshot(CharacterId(doc.at("character_id").get<std::string>()));
        s.epoch = doc.at("epoch").get<int>();
        if (const auto& init = doc.at("init_block"); !init.is_null()) {
            InitPersona ip;
            for (const auto& [name, text] : init.items()) ip.set(require_trait(name), text.get<std::string>());
            s.init_block = std::move(ip);
        }
        const auto& sections = doc.at("sections");
        if (sections.size() != kAllTraits.size()) fail(ErrorKind::validation, "snapshot must carry all eight sections");
        for (const auto& [name, sec] : sections.items()) {
            const TraitKey key = require_trait(name);
            auto& section = s.section(key);
            if (require_trait(sec.at("key").get<std::string>()) != key) {
                fail(ErrorKind::validation, "section key mismatch for " + name);
            }
            auto kind = parse_trait_kind(sec.at("kind").get<std::string>());
            if (!kind || *kind != kind_of(key)) fail(ErrorKind::validation, "bad kind for section " + name);
            for (const auto& e : sec.at("entries")) {
                section.entries.push_back(TraitEntry{e.at("epoch").get<int>(), e.at("content").get<std::string>(),
                                                     e.at("source_chapter_id").get<std::string>(),
                                                     e.at("token_count").get<std::size_t>()});
            }
        }
        s.created_at = doc.at("created_at").get<std::string>();
        s.provider_fingerprint = doc.at("provider_fingerprint").get<std::string>();
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::validation, std::string("malformed snapshot document: ") + e.what());
    }
}

}  // namespace charactergpt

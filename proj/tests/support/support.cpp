#include "support.hpp"

#include <atomic>
#include <fstream>
#include <regex>
#include <sstream>
#include <unistd.h>

#include "charactergpt/digest.hpp"
#include "charactergpt/error.hpp"

namespace testsupport {

using namespace charactergpt;

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("cgpt-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

namespace {

constexpr std::string_view kWords[] = {"harbor", "lantern", "orchard", "bridge", "archive", "market",
                                       "furnace", "chapel",  "meadow",  "signal", "quarry",  "tower"};

}  // namespace

CharacterCorpus synthetic_corpus(const std::string& id, int chapters, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto word = [&] { return std::string(kWords[rng() % std::size(kWords)]); };
    CharacterCorpus c{CharacterId(id), "Test " + id, "en", "", {}, {}};
    c.info_doc = "Test " + id + " is a courier who lives near the " + word() + ". They are stubborn and kind.";
    for (int k = 1; k <= chapters; ++k) {
        ChapterSummary ch;
        ch.index = k;
        ch.title = "Chapter " + std::to_string(k) + " " + word();
        ch.body = "In this chapter the courier visits the " + word() + " and meets someone new. chapmark-" +
                  std::to_string(k) + " The day ends near the " + word() + ".";
        c.chapters.push_back(std::move(ch));
    }
    for (int i = 0; i < 5; ++i) c.dialogue_lines.push_back("Line " + std::to_string(i) + ": see you at the " + word() + ".");
    return c;
}

fs::path write_synthetic_corpus(const fs::path& parent, const std::string& id, int chapters, std::uint64_t seed) {
    const fs::path dir = parent / id;
    save_corpus(synthetic_corpus(id, chapters, seed), dir);
    return dir;
}

double unit_hash(std::string_view text, std::uint64_t seed) {
    const std::string h = sha256_hex(std::to_string(seed) + ":" + std::string(text));
    const std::uint64_t v = std::stoull(h.substr(0, 13), nullptr, 16);
    return static_cast<double>(v) / static_cast<double>(1ULL << 52);
}

Responder pipeline_responder(std::uint64_t seed, double none_probability) {
    return [seed, none_probability](const CompletionRequest& r, const std::string& fp) -> std::string {
        const std::string tag = fp.substr(0, 8);
        const std::string& text = r.messages.empty() ? std::string() : r.messages.back().text;
        if (!r.system_prompt.empty()) {
            if (text.find("Reply with a single number from 1 to 5") != std::string::npos) {
                return std::to_string(1 + std::stoul(fp.substr(0, 8), nullptr, 16) % 5);
            }
            return "reply-" + tag;
        }
        static const std::regex kTrait(R"(Trait: ([^\n]+))");
        std::smatch m;
        const std::string trait = std::regex_search(text, m, kTrait) ? m[1].str() : "unknown";
        if (!r.attachment) return "general " + trait + " " + tag;
        static const std::regex kChapter(R"(summary of chapter (\d+) )");
        if (!std::regex_search(text, m, kChapter)) return trait + " baseline " + tag;
        if (unit_hash(fp, seed) < none_probability) return "NONE";
        return trait + " note chapmark-" + m[1].str() + " " + tag;
    };
}

std::unique_ptr<MockProvider> pipeline_mock(std::uint64_t seed, double none_probability) {
    return std::make_unique<MockProvider>(std::vector<ScriptEntry>{}, pipeline_responder(seed, none_probability));
}

PersonaSnapshot random_snapshot(std::mt19937_64& rng) {
    auto text = [&](std::size_t max_words) {
        static constexpr std::string_view kPool[] = {"alpha", "beta", "ünïcode", "quote\"d", "new\nline", "tab\t",
                                                     "{brace}", "comma,", "émoji🙂", "plain"};
        std::string s;
        const std::size_t n = 1 + rng() % max_words;
        for (std::size_t i = 0; i < n; ++i) {
            if (i) s += ' ';
            s += kPool[rng() % std::size(kPool)];
        }
        return s;
    };
    const int epoch = static_cast<int>(rng() % 21);
    PersonaSnapshot s = empty_snapshot(CharacterId("char_" + std::to_string(rng() % 1000)));
    s.epoch = epoch;
    InitPersona init;
    for (auto k : kInitTraits) init.set(k, text(12));
    s.init_block = init;
    for (auto k : kAllTraits) {
        auto& sec = s.section(k);
        if (kind_of(k) == TraitKind::type_a) {
            if (epoch > 0 && rng() % 2) {
                const int e = 1 + static_cast<int>(rng() % epoch);
                sec.replace({e, text(20), "ch" + std::to_string(e), 1 + rng() % 50});
            }
        } else {
            for (int e = 1; e <= epoch; ++e) {
                if (rng() % 3 == 0) continue;
                char id[16];
                std::snprintf(id, sizeof id, "ch%03d", e);
                sec.append({e, text(20), id, 1 + rng() % 50});
            }
        }
    }
    s.created_at = "2024-0" + std::to_string(1 + rng() % 9) + "-01T00:00:00.000Z";
    s.provider_fingerprint = "mock|prompts=" + std::to_string(rng() % 100000);
    return s;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = read_file(e.path());
    }
    return out;
}

fs::path data_dir() { return fs::path(CHARACTERGPT_DATA_DIR); }
fs::path prompts_dir() { return fs::path(CHARACTERGPT_PROMPTS_DIR); }

}  // namespace testsupport

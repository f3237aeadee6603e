#include "charactergpt/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <regex>
#include <sstream>

#include "charactergpt/error.hpp"

namespace fs = std::filesystem;

namespace charactergpt {

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::validation, "cannot read " + path.string(), {{"path", path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::internal, "cannot write " + path.string());
    out << content;
}

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string slugify(const std::string& title) {
    std::string slug;
    for (unsigned char c : title) {
        if (std::isalnum(c)) {
            slug.push_back(static_cast<char>(std::tolower(c)));
        } else if (!slug.empty() && slug.back() != '-') {
            slug.push_back('-');
        }
    }
    while (!slug.empty() && slug.back() == '-') slug.pop_back();
    return slug.empty() ? "chapter" : slug;
}

}  // namespace

std::string ChapterSummary::id() const {
    std::ostringstream out;
    out << "ch" << std::setw(3) << std::setfill('0') << index;
    return out.str();
}

const ChapterSummary& CharacterCorpus::chapter(int index) const {
    if (index < 1 || static_cast<std::size_t>(index) > chapters.size()) {
        fail(ErrorKind::not_found, "corpus " + character_id.str() + " has no chapter " + std::to_string(index),
             {{"chapter_count", chapters.size()}});
    }
    return chapters[static_cast<std::size_t>(index - 1)];
}

CharacterCorpus load_corpus(const fs::path& root, const CorpusLoadOptions& options) {
    const Tokenizer& tokenizer = options.tokenizer ? *options.tokenizer : default_tokenizer();
    if (!fs::is_directory(root)) {
        fail(ErrorKind::validation, "corpus directory not found: " + root.string(), {{"path", root.string()}});
    }
    auto dir = fs::absolute(root).lexically_normal();
    if (dir.filename().empty()) dir = dir.parent_path();
    CharacterCorpus corpus{CharacterId(dir.filename().string()), {}, "en", {}, {}, {}};
    corpus.display_name = corpus.character_id.str();

    const fs::path meta = root / "character.json";
    if (fs::exists(meta)) {
        try {
            auto doc = nlohmann::json::parse(read_file(meta));
            corpus.display_name = doc.value("display_name", corpus.display_name);
            corpus.language_tag = doc.value("language_tag", corpus.language_tag);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::validation, meta.string() + ": " + e.what(), {{"path", meta.string()}});
        }
    }

    const fs::path info = root / "info.md";
    if (!fs::exists(info)) fail(ErrorKind::validation, "missing info doc: " + info.string(), {{"path", info.string()}});
    corpus.info_doc = trim(read_file(info));
    if (corpus.info_doc.empty()) fail(ErrorKind::validation, "info doc is empty: " + info.string(), {{"path", info.string()}});

    static const std::regex kChapterName(R"(^(\d{3,})_([^/]*)\.md$)");
    std::map<int, fs::path> by_index;
    const fs::path chapter_dir = root / "chapters";
    if (fs::is_directory(chapter_dir)) {
        for (const auto& entry : fs::directory_iterator(chapter_dir)) {
            if (!entry.is_regular_file()) continue;
            const std::string name = entry.path().filename().string();
            if (entry.path().extension() != ".md") continue;
            std::smatch m;
            if (!std::regex_match(name, m, kChapterName)) {
                fail(ErrorKind::validation, "chapter file does not match NNN_<slug>.md: " + entry.path().string(),
                     {{"path", entry.path().string()}});
            }
            const int index = std::stoi(m[1].str());
            if (index < 1) fail(ErrorKind::validation, "chapter index must be >= 1: " + entry.path().string());
            if (!by_index.emplace(index, entry.path()).second) {
                fail(ErrorKind::validation,
                     "duplicate chapter index " + std::to_string(index) + ": " + entry.path().string(),
                     {{"path", entry.path().string()}, {"index", index}});
            }
        }
    }
    int expected = 1;
    for (const auto& [index, path] : by_index) {
        if (index != expected) {
            fail(ErrorKind::validation, "gap at index " + std::to_string(expected) + " (next file " + path.string() + ")",
                 {{"path", path.string()}, {"missing_index", expected}});
        }
        ++expected;
        std::string text = read_file(path);
        ChapterSummary ch{index, {}, {}};
        std::istringstream lines(text);
        std::string first;
        std::getline(lines, first);
        if (first.rfind("# ", 0) == 0) {
            ch.title = trim(first.substr(2));
            std::ostringstream rest;
            rest << lines.rdbuf();
            ch.body = trim(rest.str());
        } else {
            std::smatch m;
            const std::string name = path.filename().string();
            std::regex_match(name, m, kChapterName);
            ch.title = m[2].str();
            std::replace(ch.title.begin(), ch.title.end(), '_', ' ');
            std::replace(ch.title.begin(), ch.title.end(), '-', ' ');
            ch.body = trim(text);
        }
        if (ch.body.empty()) fail(ErrorKind::validation, "empty chapter body: " + path.string(), {{"path", path.string()}});
        const std::size_t tokens = tokenizer.count(ch.body);
        if (tokens > options.max_chapter_tokens) {
            fail(ErrorKind::validation,
                 "chapter exceeds " + std::to_string(options.max_chapter_tokens) + " tokens: " + path.string(),
                 {{"path", path.string()}, {"tokens", tokens}});
        }
        corpus.chapters.push_back(std::move(ch));
    }

    const fs::path dialogue_dir = root / "dialogue";
    if (fs::is_directory(dialogue_dir)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dialogue_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            std::istringstream lines(read_file(f));
            for (std::string line; std::getline(lines, line);) {
                line = trim(line);
                if (!line.empty()) corpus.dialogue_lines.push_back(std::move(line));
            }
        }
    }
    return corpus;
}

void save_corpus(const CharacterCorpus& corpus, const fs::path& root) {
    fs::create_directories(root / "chapters");
    write_file(root / "info.md", corpus.info_doc + "\n");
    nlohmann::ordered_json meta{{"display_name", corpus.display_name}, {"language_tag", corpus.language_tag}};
    write_file(root / "character.json", meta.dump(2) + "\n");
    for (const auto& ch : corpus.chapters) {
        std::ostringstream name;
        name << std::setw(3) << std::setfill('0') << ch.index << '_' << slugify(ch.title) << ".md";
        write_file(root / "chapters" / name.str(), "# " + ch.title + "\n\n" + ch.body + "\n");
    }
    if (!corpus.dialogue_lines.empty()) {
        fs::create_directories(root / "dialogue");
        std::string lines;
        for (const auto& l : corpus.dialogue_lines) lines += l + "\n";
        write_file(root / "dialogue" / "lines.txt", lines);
    }
}

CorpusStats compute_stats(const CharacterCorpus& corpus, const PersonaSnapshot* snapshot, const Tokenizer& tokenizer) {
    CorpusStats stats;
    stats.chapter_count = corpus.chapters.size();
    for (const auto& ch : corpus.chapters) stats.novel_tokens += tokenizer.count(ch.body);
    stats.info_tokens = tokenizer.count(corpus.info_doc);
    for (const auto& line : corpus.dialogue_lines) stats.dialogue_tokens += tokenizer.count(line);
    if (snapshot) {
        if (snapshot->init_block) {
            for (const auto& [key, text] : snapshot->init_block->texts()) stats.refined_info_tokens += tokenizer.count(text);
        }
        for (const auto& [key, n] : section_token_totals(*snapshot, tokenizer)) stats.trained_tokens += n;
    }
    return stats;
}

nlohmann::ordered_json to_json(const CorpusStats& s) {
    return {{"chapter_count", s.chapter_count},   {"novel_tokens", s.novel_tokens},
            {"info_tokens", s.info_tokens},       {"refined_info_tokens", s.refined_info_tokens},
            {"dialogue_tokens", s.dialogue_tokens}, {"trained_tokens", s.trained_tokens}};
}

}  // namespace charactergpt

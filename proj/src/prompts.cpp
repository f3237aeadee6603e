#include "charactergpt/prompts.hpp"

#include <fstream>
#include <sstream>

#include "charactergpt/digest.hpp"
#include "charactergpt/error.hpp"

#ifndef CHARACTERGPT_PROMPTS_DIR
#define CHARACTERGPT_PROMPTS_DIR "prompts"
#endif

namespace fs = std::filesystem;

namespace charactergpt {

namespace {

bool is_name_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

/// Calls fn(name, begin, end) for each {name} occurrence.
template <typename Fn>
void scan_placeholders(std::string_view tmpl, Fn&& fn) {
    std::size_t pos = 0;
    while ((pos = tmpl.find('{', pos)) != std::string_view::npos) {
        std::size_t end = pos + 1;
        while (end < tmpl.size() && is_name_char(tmpl[end])) ++end;
        if (end < tmpl.size() && tmpl[end] == '}' && end > pos + 1) {
            fn(tmpl.substr(pos + 1, end - pos - 1), pos, end + 1);
            pos = end + 1;
        } else {
            ++pos;
        }
    }
}

std::string read_template(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::validation, "missing prompt template " + path.string(), {{"path", path.string()}});
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void check(std::string_view label, const std::string& tmpl, const std::set<std::string, std::less<>>& allowed) {
    if (tmpl.find_first_not_of(" \t\r\n") == std::string::npos) {
        fail(ErrorKind::validation, std::string(label) + " template is empty");
    }
    for (const auto& name : placeholders_in(tmpl)) {
        if (allowed.count(name) == 0) {
            fail(ErrorKind::validation, std::string(label) + " template uses unknown placeholder {" + name + "}");
        }
    }
}

}  // namespace

std::set<std::string, std::less<>> placeholders_in(std::string_view tmpl) {
    std::set<std::string, std::less<>> names;
    scan_placeholders(tmpl, [&](std::string_view name, std::size_t, std::size_t) { names.emplace(name); });
    return names;
}

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    std::size_t copied = 0;
    scan_placeholders(tmpl, [&](std::string_view name, std::size_t begin, std::size_t end) {
        auto it = values.find(name);
        if (it == values.end()) fail(ErrorKind::validation, "no value for placeholder {" + std::string(name) + "}");
        out.append(tmpl.substr(copied, begin - copied));
        out.append(it->second);
        copied = end;
    });
    out.append(tmpl.substr(copied));
    return out;
}

std::string PromptSet::version_hash() const {
    std::string joined;
    for (const auto* part : {&extraction, &generalization, &inference}) {
        joined += std::to_string(part->size());
        joined += ':';
        joined += *part;
    }
    return sha256_hex(joined);
}

void PromptSet::validate() const {
    check("extraction", extraction, kExtractionPlaceholders);
    check("generalization", generalization, kGeneralizationPlaceholders);
    check("inference", inference, kInferencePlaceholders);
}

PromptSet PromptSet::load(const fs::path& dir) {
    PromptSet set{read_template(dir / "extraction.txt"), read_template(dir / "generalization.txt"),
                  read_template(dir / "inference.txt")};
    set.validate();
    return set;
}

void PromptSet::save(const fs::path& dir) const {
    fs::create_directories(dir);
    for (auto [name, text] : {std::pair{"extraction.txt", &extraction}, {"generalization.txt", &generalization},
                              {"inference.txt", &inference}}) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::internal, "cannot write " + (dir / name).string());
        out << *text;
    }
}

fs::path default_prompts_dir() { return fs::path(CHARACTERGPT_PROMPTS_DIR); }

}  // namespace charactergpt

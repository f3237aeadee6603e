#include "charactergpt/inference.hpp"

#include <algorithm>
#include <numeric>

#include "charactergpt/error.hpp"

namespace charactergpt {

ToneProfile build_tone(const CharacterCorpus& corpus, std::size_t k) {
    std::vector<std::size_t> order(corpus.dialogue_lines.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return corpus.dialogue_lines[a].size() > corpus.dialogue_lines[b].size();
    });
    ToneProfile tone{corpus.character_id, {}, std::nullopt};
    for (std::size_t i = 0; i < order.size() && i < k; ++i) tone.exemplars.push_back(corpus.dialogue_lines[order[i]]);
    return tone;
}

namespace {

class Builder {
public:
    explicit Builder(AssembledPersona& p) : p_(p) {}

    void text(std::string_view s) { p_.body.append(s); }

    template <typename Fn>
    void section(PersonaBlock block, std::optional<TraitKey> key, Fn&& fill) {
        const std::size_t start = p_.body.size();
        fill();
        p_.section_offsets.push_back({block, key, start, p_.body.size()});
    }

private:
    AssembledPersona& p_;
};

}  // namespace

AssembledPersona assemble(const PersonaSnapshot& snapshot, const ToneProfile& tone, std::string_view display) {
    if (!snapshot.init_block) {
        fail(ErrorKind::precondition,
             "snapshot " + snapshot.character_id.str() + "@" + std::to_string(snapshot.epoch) +
                 " has no initialization block; run initialization first");
    }
    AssembledPersona p{snapshot.character_id, snapshot.epoch, {}, std::nullopt, {}};
    Builder b(p);
    const std::string name = display.empty() ? snapshot.character_id.str() : std::string(display);

    b.text("# " + name + " (epoch " + std::to_string(snapshot.epoch) + ")\n\n## Initialization\n");
    for (auto key : kInitTraits) {
        b.section(PersonaBlock::init, key, [&] {
            b.text("\n### " + std::string(display_name(key)) + "\n\n" + snapshot.init_block->at(key) + "\n");
        });
    }

    const bool trained = std::any_of(kAllTraits.begin(), kAllTraits.end(),
                                     [&](TraitKey k) { return !snapshot.section(k).entries.empty(); });
    if (trained) {
        b.text("\n## Trained\n");
        for (auto key : kAllTraits) {
            const auto& section = snapshot.section(key);
            if (section.entries.empty()) continue;
            b.section(PersonaBlock::train, key, [&] {
                b.text("\n### " + std::string(display_name(key)) + "\n\n");
                if (section.kind == TraitKind::type_a) {
                    b.text(section.entries.front().content + "\n");
                } else {
                    for (const auto& e : section.entries) {
                        b.text("- [epoch " + std::to_string(e.epoch) + "] " + e.content + "\n");
                    }
                }
            });
        }
    }

    if (!tone.empty()) {
        std::string tone_text;
        if (tone.style_notes) tone_text += *tone.style_notes + "\n\n";
        for (const auto& line : tone.exemplars) tone_text += "> " + line + "\n";
        b.text("\n## Tone\n\n");
        b.section(PersonaBlock::tone, std::nullopt, [&] { b.text(tone_text); });
        p.tone = std::move(tone_text);
    }
    return p;
}

std::string render_inference_prompt(const PromptSet& prompts, const AssembledPersona& persona,
                                    std::string_view display, std::string_view language) {
    return render_template(prompts.inference,
                           {{"character", display.empty() ? persona.character_id.str() : std::string(display)},
                            {"persona", persona.body},
                            {"language", std::string(language)}});
}

ChatSession::ChatSession(std::string id, AssembledPersona persona, std::string system_prompt,
                         std::shared_ptr<const Clock> clock)
    : id_(std::move(id)),
      persona_(std::move(persona)),
      system_prompt_(std::move(system_prompt)),
      created_at_(format_utc((clock ? clock : system_clock())->now())) {}

std::string ChatSession::respond(std::string_view utterance, Provider& provider, const ChatOptions& options) {
    if (utterance.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        fail(ErrorKind::precondition, "utterance must not be empty");
    }
    std::lock_guard lock(mutex_);
    const Tokenizer& tok = options.tokenizer ? *options.tokenizer : default_tokenizer();

    const std::size_t persona_tokens = tok.count(system_prompt_);
    const std::size_t utterance_tokens = tok.count(utterance);
    if (persona_tokens + utterance_tokens > options.context_budget_tokens) {
        fail(ErrorKind::precondition, "persona and utterance exceed the context budget",
             {{"persona_tokens", persona_tokens},
              {"utterance_tokens", utterance_tokens},
              {"budget_tokens", options.context_budget_tokens}});
    }
    // Keep the newest turns that fit, dropping whole user/assistant pairs.
    std::size_t used = persona_tokens + utterance_tokens;
    std::size_t first = history_.size();
    while (first >= 2) {
        const std::size_t pair = tok.count(history_[first - 2].text) + tok.count(history_[first - 1].text);
        if (used + pair > options.context_budget_tokens) break;
        used += pair;
        first -= 2;
    }

    CompletionRequest request;
    request.system_prompt = system_prompt_;
    request.messages.assign(history_.begin() + static_cast<std::ptrdiff_t>(first), history_.end());
    request.messages.push_back({Role::user, std::string(utterance)});
    request.temperature = options.temperature;
    request.max_tokens = options.max_tokens;

    std::string reply = provider.complete(request).text;
    history_.push_back({Role::user, std::string(utterance)});
    history_.push_back({Role::assistant, reply});
    return reply;
}

std::vector<ChatMessage> ChatSession::history() const {
    std::lock_guard lock(mutex_);
    return history_;
}

nlohmann::ordered_json ChatSession::to_json() const {
    auto messages = nlohmann::ordered_json::array();
    for (const auto& m : history()) messages.push_back({{"role", charactergpt::to_string(m.role)}, {"text", m.text}});
    return {{"session_id", id_},
            {"character_id", persona_.character_id.str()},
            {"epoch", persona_.epoch},
            {"created_at", created_at_},
            {"messages", std::move(messages)}};
}

std::string ChatSession::transcript_jsonl() const {
    std::string out = nlohmann::ordered_json{{"session_id", id_},
                                             {"character_id", persona_.character_id.str()},
                                             {"epoch", persona_.epoch},
                                             {"created_at", created_at_}}
                          .dump() +
                      "\n";
    for (const auto& m : history()) {
        out += nlohmann::ordered_json{{"role", charactergpt::to_string(m.role)}, {"text", m.text}}.dump() + "\n";
    }
    return out;
}

std::shared_ptr<ChatSession> open_session(std::string session_id, const PersonaSnapshot& snapshot,
                                          const ToneProfile& tone, const PromptSet& prompts,
                                          std::string_view display_name, std::string_view language,
                                          std::shared_ptr<const Clock> clock) {
    AssembledPersona persona = assemble(snapshot, tone, display_name);
    std::string system_prompt = render_inference_prompt(prompts, persona, display_name, language);
    return std::make_shared<ChatSession>(std::move(session_id), std::move(persona), std::move(system_prompt),
                                         std::move(clock));
}

}  // namespace charactergpt

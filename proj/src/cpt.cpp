#include "charactergpt/cpt.hpp"

#include <algorithm>
#include <cctype>
#include <future>
#include <iomanip>
#include <sstream>

#include "charactergpt/store.hpp"

namespace charactergpt {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string params_label(const CallParams& p) {
    std::ostringstream out;
    out << 't' << std::setprecision(3) << p.temperature << '/' << p.max_tokens;
    return out.str();
}

std::int64_t elapsed_ms(const Clock& clock, TimePoint since) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(clock.now() - since).count();
}

std::string chapter_label(const ChapterSummary& chapter) {
    return "summary of chapter " + std::to_string(chapter.index) + " (" + chapter.title + ")";
}

}  // namespace

std::string_view to_string(TraitStatus status) noexcept {
    switch (status) {
        case TraitStatus::extracted: return "extracted";
        case TraitStatus::generalized: return "generalized";
        case TraitStatus::empty: return "empty";
        case TraitStatus::failed: return "failed";
    }
    return "failed";
}

std::string provider_fingerprint(const Provider& provider, const PromptSet& prompts, const CptOptions& options) {
    return provider.model_id() + "|prompts=" + prompts.lineage() + "|extract=" + params_label(options.extraction) +
           "|generalize=" + params_label(options.generalization);
}

CompletionRequest build_extraction_request(const PromptSet& prompts, const CharacterCorpus& character, TraitKey trait,
                                           std::string_view source_label, std::string_view document,
                                           const CallParams& params) {
    const std::string text = render_template(prompts.extraction, {{"character", character.display_name},
                                                                  {"trait_name", std::string(display_name(trait))},
                                                                  {"trait_definition", std::string(definition(trait))},
                                                                  {"source", std::string(source_label)},
                                                                  {"chapter_body", std::string(document)},
                                                                  {"language", character.language_tag}});
    CompletionRequest request;
    request.messages.push_back({Role::user, text});
    request.attachment = std::string(document);
    request.temperature = params.temperature;
    request.max_tokens = params.max_tokens;
    return request;
}

CompletionRequest build_generalization_request(const PromptSet& prompts, const CharacterCorpus& character,
                                               TraitKey trait, const std::optional<std::string>& prior,
                                               std::string_view extracted, const CallParams& params) {
    const std::string text =
        render_template(prompts.generalization, {{"character", character.display_name},
                                                 {"trait_name", std::string(display_name(trait))},
                                                 {"trait_definition", std::string(definition(trait))},
                                                 {"prior_text", prior ? *prior : std::string("(none yet)")},
                                                 {"extracted_text", std::string(extracted)},
                                                 {"language", character.language_tag}});
    CompletionRequest request;
    request.messages.push_back({Role::user, text});
    request.temperature = params.temperature;
    request.max_tokens = params.max_tokens;
    return request;
}

std::string normalize_extraction(std::string_view reply) {
    std::string text = trim(reply);
    std::string lower;
    for (unsigned char c : text) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower == "none" || lower == "none.") return {};
    return text;
}

std::string extract_trait(Provider& provider, const PromptSet& prompts, const ChapterSummary& chapter, TraitKey trait,
                          const CharacterCorpus& character, const CallParams& params) {
    if (chapter.body.empty()) {
        fail(ErrorKind::precondition, "chapter " + std::to_string(chapter.index) + " has an empty body");
    }
    const auto request = build_extraction_request(prompts, character, trait, chapter_label(chapter), chapter.body, params);
    return normalize_extraction(provider.complete(request).text);
}

std::string generalize_trait(Provider& provider, const PromptSet& prompts, const std::optional<std::string>& prior,
                             std::string_view extracted, TraitKey trait, const CharacterCorpus& character,
                             const CallParams& params) {
    if (kind_of(trait) != TraitKind::type_a) {
        fail(ErrorKind::precondition, "only type_a traits are generalized, got " + std::string(to_string(trait)));
    }
    if (trim(extracted).empty()) fail(ErrorKind::precondition, "nothing to generalize for " + std::string(to_string(trait)));
    const auto request = build_generalization_request(prompts, character, trait, prior, extracted, params);
    std::string text = trim(provider.complete(request).text);
    if (text.empty()) {
        fail(ErrorKind::validation, "generalization erased type_a trait " + std::string(to_string(trait)),
             {{"trait", to_string(trait)}});
    }
    return text;
}

EpochError::EpochError(const Error& cause, int epoch, TraitKey trait, std::vector<TraitOutcome> outcomes)
    : Error(cause.kind(),
            "epoch " + std::to_string(epoch) + " failed on " + std::string(to_string(trait)) + ": " + cause.what(),
            [&] {
                auto d = cause.details();
                d["epoch"] = epoch;
                d["trait"] = to_string(trait);
                return d;
            }()),
      epoch_(epoch),
      trait_(trait),
      outcomes_(std::move(outcomes)) {}

nlohmann::ordered_json to_json(const TraitOutcome& o) {
    nlohmann::ordered_json j{{"epoch", o.epoch},
                             {"trait", to_string(o.trait)},
                             {"status", to_string(o.status)},
                             {"extraction_ms", o.extraction_ms},
                             {"generalization_ms", o.generalization_ms}};
    if (!o.error.empty()) j["error"] = o.error;
    return j;
}

namespace {

struct TraitWork {
    TraitOutcome outcome;
    std::string text;  // extracted (type_b) or generalized (type_a); empty when nothing new
    std::optional<Error> error;
};

TraitWork process_trait(const PersonaSnapshot& previous, const ChapterSummary& chapter, const CharacterCorpus& character,
                        const PromptSet& prompts, Provider& provider, const CptOptions& options, TraitKey trait) {
    TraitWork work;
    work.outcome.epoch = chapter.index;
    work.outcome.trait = trait;
    const Clock& clock = options.clk();
    try {
        auto started = clock.now();
        std::string extracted = extract_trait(provider, prompts, chapter, trait, character, options.extraction);
        work.outcome.extraction_ms = elapsed_ms(clock, started);
        if (extracted.empty()) {
            work.outcome.status = TraitStatus::empty;
            return work;
        }
        if (kind_of(trait) == TraitKind::type_b) {
            work.outcome.status = TraitStatus::extracted;
            work.text = std::move(extracted);
            return work;
        }
        const auto& entries = previous.section(trait).entries;
        std::optional<std::string> prior;
        if (!entries.empty()) prior = entries.front().content;
        started = clock.now();
        work.text = generalize_trait(provider, prompts, prior, extracted, trait, character, options.generalization);
        work.outcome.generalization_ms = elapsed_ms(clock, started);
        work.outcome.status = TraitStatus::generalized;
    } catch (const Error& e) {
        work.outcome.status = TraitStatus::failed;
        work.outcome.error = e.what();
        work.error = e;
    }
    return work;
}

}  // namespace

EpochResult train_epoch(const PersonaSnapshot& previous, const ChapterSummary& chapter,
                        const CharacterCorpus& character, const PromptSet& prompts, Provider& provider,
                        const CptOptions& options) {
    if (chapter.index != previous.epoch + 1) {
        fail(ErrorKind::precondition,
             "chapter " + std::to_string(chapter.index) + " cannot follow snapshot epoch " + std::to_string(previous.epoch),
             {{"chapter", chapter.index}, {"snapshot_epoch", previous.epoch}});
    }
    if (!previous.init_block) fail(ErrorKind::precondition, "snapshot has no initialization block; run initialization first");
    if (chapter.body.empty()) fail(ErrorKind::precondition, "chapter " + std::to_string(chapter.index) + " has an empty body");

    std::vector<TraitWork> work;
    work.reserve(kAllTraits.size());
    if (options.parallel) {
        std::vector<std::future<TraitWork>> pending;
        for (auto trait : kAllTraits) {
            pending.push_back(std::async(std::launch::async, process_trait, std::cref(previous), std::cref(chapter),
                                         std::cref(character), std::cref(prompts), std::ref(provider),
                                         std::cref(options), trait));
        }
        for (auto& f : pending) work.push_back(f.get());
    } else {
        for (auto trait : kAllTraits) {
            work.push_back(process_trait(previous, chapter, character, prompts, provider, options, trait));
        }
    }

    EpochResult result{previous, {}};
    for (const auto& w : work) result.outcomes.push_back(w.outcome);
    for (const auto& w : work) {
        if (w.error) throw EpochError(*w.error, chapter.index, w.outcome.trait, result.outcomes);
    }

    PersonaSnapshot& next = result.snapshot;
    next.epoch = chapter.index;
    next.created_at = format_utc(options.clk().now());
    next.provider_fingerprint = provider_fingerprint(provider, prompts, options);
    for (auto& w : work) {
        if (w.text.empty()) continue;
        TraitEntry entry{chapter.index, w.text, chapter.id(), options.tok().count(w.text)};
        auto& section = next.section(w.outcome.trait);
        if (section.kind == TraitKind::type_a) {
            section.replace(std::move(entry));
        } else {
            section.append(std::move(entry));
        }
    }
    next.validate();
    return result;
}

nlohmann::ordered_json to_json(const TrainRun& run) {
    auto log = nlohmann::ordered_json::array();
    for (const auto& o : run.log) log.push_back(to_json(o));
    nlohmann::ordered_json j{{"character_id", run.character_id.str()},
                             {"start_epoch", run.start_epoch},
                             {"end_epoch", run.end_epoch},
                             {"completed_epochs", run.completed_epochs},
                             {"status", run.ok() ? "succeeded" : "failed"},
                             {"log", std::move(log)}};
    if (run.failure) {
        j["failure"] = {{"epoch", run.failure->epoch},
                        {"kind", to_string(run.failure->kind)},
                        {"message", run.failure->message}};
    }
    return j;
}

TrainRun train(const CharacterCorpus& corpus, const PromptSet& prompts, Provider& provider, PersonaStore& store,
               std::optional<int> resume_from, const CptOptions& options,
               const std::function<void(const EpochResult&)>& on_epoch) {
    const CharacterId& id = corpus.character_id;
    auto lock = store.lock_writer(id);
    const auto head = store.head(id);
    if (!head) fail(ErrorKind::precondition, "character " + id.str() + " has no epoch-0 snapshot; run initialization first");
    const int last = static_cast<int>(corpus.chapters.size());
    if (last == 0) fail(ErrorKind::validation, "corpus " + id.str() + " has no chapters to train on");
    const int start = resume_from.value_or(*head + 1);
    if (start < 1) fail(ErrorKind::precondition, "resume epoch must be >= 1");
    if (start > last) {
        fail(ErrorKind::precondition,
             "nothing to train: epoch " + std::to_string(start) + " is past the last chapter (" + std::to_string(last) + ")",
             {{"head", *head}, {"chapter_count", last}});
    }
    if (start > *head + 1) {
        fail(ErrorKind::precondition, "cannot resume at epoch " + std::to_string(start) + ": snapshot " +
                                          std::to_string(start - 1) + " does not exist",
             {{"head", *head}});
    }
    if (start <= *head) {
        fail(ErrorKind::conflict,
             "epochs " + std::to_string(start) + ".." + std::to_string(*head) + " already exist; snapshots are immutable",
             {{"head", *head}});
    }

    TrainRun run{id, start, last, {}, {}, std::nullopt};
    PersonaSnapshot previous = store.get_snapshot(id, start - 1);
    for (int epoch = start; epoch <= last; ++epoch) {
        const ChapterSummary& chapter = corpus.chapter(epoch);
        try {
            EpochResult result = train_epoch(previous, chapter, corpus, prompts, provider, options);
            store.put_snapshot(result.snapshot, chapter.title);
            store.append_runlog(id, result.outcomes);
            run.log.insert(run.log.end(), result.outcomes.begin(), result.outcomes.end());
            run.completed_epochs.push_back(epoch);
            if (on_epoch) on_epoch(result);
            previous = std::move(result.snapshot);
        } catch (const EpochError& e) {
            store.append_runlog(id, e.outcomes());
            run.log.insert(run.log.end(), e.outcomes().begin(), e.outcomes().end());
            run.failure = RunFailure{epoch, e.kind(), e.what()};
            break;
        } catch (const Error& e) {
            run.failure = RunFailure{epoch, e.kind(), e.what()};
            break;
        }
    }
    return run;
}

}  // namespace charactergpt

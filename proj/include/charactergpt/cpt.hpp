#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "charactergpt/clock.hpp"
#include "charactergpt/corpus.hpp"
#include "charactergpt/error.hpp"
#include "charactergpt/gateway.hpp"
#include "charactergpt/persona.hpp"
#include "charactergpt/prompts.hpp"

namespace charactergpt {

class PersonaStore;

struct CallParams {
    double temperature = 0.7;
    int max_tokens = 4096;
};

struct CptOptions {
    CallParams extraction;
    CallParams generalization;
    /// Run the eight per-trait extractions of an epoch concurrently.
    bool parallel = true;
    const Tokenizer* tokenizer = nullptr;  // default_tokenizer() when null
    std::shared_ptr<const Clock> clock;    // system_clock() when null

    const Tokenizer& tok() const { return tokenizer ? *tokenizer : default_tokenizer(); }
    const Clock& clk() const { return clock ? *clock : *system_clock(); }
};

/// "<model>|prompts=<hash16>|extract=t<T>/<N>|generalize=t<T>/<N>".
std::string provider_fingerprint(const Provider& provider, const PromptSet& prompts, const CptOptions& options);

/// Extraction call: the rendered extraction template is the user message and
/// the document travels as the attachment.
CompletionRequest build_extraction_request(const PromptSet& prompts, const CharacterCorpus& character, TraitKey trait,
                                           std::string_view source_label, std::string_view document,
                                           const CallParams& params);

CompletionRequest build_generalization_request(const PromptSet& prompts, const CharacterCorpus& character,
                                               TraitKey trait, const std::optional<std::string>& prior,
                                               std::string_view extracted, const CallParams& params);

/// Trims the reply and maps the "nothing found" sentinel (NONE) to "".
std::string normalize_extraction(std::string_view reply);

/// Extracts one trait from one chapter summary. An empty result means the
/// chapter reveals nothing about the trait.
std::string extract_trait(Provider& provider, const PromptSet& prompts, const ChapterSummary& chapter, TraitKey trait,
                          const CharacterCorpus& character, const CallParams& params = {});

/// Refines a type_a trait: folds the new extraction into the prior text and
/// returns the replacement. Never returns an empty string.
std::string generalize_trait(Provider& provider, const PromptSet& prompts, const std::optional<std::string>& prior,
                             std::string_view extracted, TraitKey trait, const CharacterCorpus& character,
                             const CallParams& params = {});

enum class TraitStatus { extracted, generalized, empty, failed };
std::string_view to_string(TraitStatus status) noexcept;

struct TraitOutcome {
    int epoch = 0;
    TraitKey trait = TraitKey::personality;
    TraitStatus status = TraitStatus::empty;
    std::int64_t extraction_ms = 0;
    std::int64_t generalization_ms = 0;
    std::string error;
};

nlohmann::ordered_json to_json(const TraitOutcome& outcome);

/// Raised when an epoch aborts; carries the per-trait outcomes so callers can
/// log which trait failed.
class EpochError : public Error {
public:
    EpochError(const Error& cause, int epoch, TraitKey trait, std::vector<TraitOutcome> outcomes);

    int epoch() const noexcept { return epoch_; }
    TraitKey trait() const noexcept { return trait_; }
    const std::vector<TraitOutcome>& outcomes() const noexcept { return outcomes_; }

private:
    int epoch_;
    TraitKey trait_;
    std::vector<TraitOutcome> outcomes_;
};

struct EpochResult {
    PersonaSnapshot snapshot;
    std::vector<TraitOutcome> outcomes;  // one per trait, canonical order
};

/// One CPT epoch. For every trait: extract from the chapter; a non-empty
/// type_a extraction is generalized and replaces the section, a non-empty
/// type_b extraction is appended with epoch = chapter.index. `previous` is
/// never modified. Any provider failure aborts the whole epoch with an
/// EpochError.
EpochResult train_epoch(const PersonaSnapshot& previous, const ChapterSummary& chapter,
                        const CharacterCorpus& character, const PromptSet& prompts, Provider& provider,
                        const CptOptions& options = {});

struct RunFailure {
    int epoch = 0;
    ErrorKind kind = ErrorKind::internal;
    std::string message;
};

struct TrainRun {
    CharacterId character_id;
    int start_epoch = 1;
    int end_epoch = 1;
    std::vector<int> completed_epochs;
    std::vector<TraitOutcome> log;
    std::optional<RunFailure> failure;

    bool ok() const noexcept { return !failure.has_value(); }
};

nlohmann::ordered_json to_json(const TrainRun& run);

/// Runs train_epoch for every chapter from the resume point (default: the
/// epoch after the store's head) through the last chapter, persisting each
/// snapshot and its run-log records before moving on. A failure stops the
/// run; every completed epoch stays persisted and the failure is reported in
/// the returned TrainRun.
TrainRun train(const CharacterCorpus& corpus, const PromptSet& prompts, Provider& provider, PersonaStore& store,
               std::optional<int> resume_from = std::nullopt, const CptOptions& options = {},
               const std::function<void(const EpochResult&)>& on_epoch = {});

}  // namespace charactergpt

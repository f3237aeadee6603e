#include "charactergpt/initializer.hpp"

#include <future>

namespace charactergpt {

InitResult initialize(const InitRequest& request) {
    const CharacterCorpus& corpus = request.corpus;
    if (corpus.info_doc.empty()) {
        fail(ErrorKind::precondition, "character " + corpus.character_id.str() + " has an empty info document");
    }
    request.prompts.validate();

    auto run = [&](TraitKey trait) {
        const auto req = build_extraction_request(request.prompts, corpus, trait, "character information document",
                                                  corpus.info_doc, request.options.extraction);
        return normalize_extraction(request.provider.complete(req).text);
    };

    std::vector<std::future<std::string>> pending;
    for (auto trait : kInitTraits) {
        pending.push_back(std::async(request.options.parallel ? std::launch::async : std::launch::deferred, run, trait));
    }

    // Join everything before reporting so no call is left running.
    InitResult result{{}, empty_snapshot(corpus.character_id), {}};
    std::optional<Error> first_error;
    for (std::size_t i = 0; i < kInitTraits.size(); ++i) {
        try {
            std::string text = pending[i].get();
            if (text.empty()) {
                fail(ErrorKind::validation,
                     "initialization extracted nothing for " + std::string(to_string(kInitTraits[i])),
                     {{"trait", to_string(kInitTraits[i])}});
            }
            result.persona.set(kInitTraits[i], std::move(text));
        } catch (const Error& e) {
            if (!first_error) first_error = e;
        }
    }
    if (first_error) throw *first_error;

    for (const auto& [key, text] : result.persona.texts()) {
        for (const auto& ch : corpus.chapters) {
            if (ch.title.size() >= 4 && text.find(ch.title) != std::string::npos) {
                result.warnings.push_back("init " + std::string(to_string(key)) + " mentions chapter " +
                                          std::to_string(ch.index) + " title \"" + ch.title + "\"");
            }
        }
    }

    result.snapshot.init_block = result.persona;
    result.snapshot.created_at = format_utc(request.options.clk().now());
    result.snapshot.provider_fingerprint = provider_fingerprint(request.provider, request.prompts, request.options);
    result.snapshot.validate();
    return result;
}

}  // namespace charactergpt

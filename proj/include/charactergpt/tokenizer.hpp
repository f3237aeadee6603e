#pragma once

#include <cstddef>
#include <string_view>

namespace charactergpt {

/// Token counts are diagnostics only (corpus statistics, trait growth); no
/// control flow depends on them except the chat context budget.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::size_t count(std::string_view text) const = 0;
};

/// Splits on whitespace; each run of word characters is one token and every
/// punctuation byte is its own token. Bytes >= 0x80 count as word characters,
/// so UTF-8 text in any script is handled without decoding.
class SimpleTokenizer final : public Tokenizer {
public:
    std::size_t count(std::string_view text) const override;
};

const Tokenizer& default_tokenizer();

}  // namespace charactergpt

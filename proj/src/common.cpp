#include <cctype>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "charactergpt/clock.hpp"
#include "charactergpt/digest.hpp"
#include "charactergpt/error.hpp"
#include "charactergpt/tokenizer.hpp"

namespace charactergpt {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::validation: return "validation";
        case ErrorKind::precondition: return "precondition";
        case ErrorKind::not_found: return "not_found";
        case ErrorKind::conflict: return "conflict";
        case ErrorKind::transport: return "transport";
        case ErrorKind::protocol: return "protocol";
        case ErrorKind::internal: return "internal";
    }
    return "internal";
}

std::shared_ptr<const Clock> system_clock() {
    static const auto clock = std::make_shared<const SystemClock>();
    return clock;
}

std::shared_ptr<const Clock> fixed_clock() {
    static const auto clock = std::make_shared<const FixedClock>();
    return clock;
}

std::string format_utc(TimePoint tp) {
    using namespace std::chrono;
    const auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count() % 1000;
    const std::time_t secs = system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0')
        << (ms < 0 ? ms + 1000 : ms) << 'Z';
    return out.str();
}

namespace {

bool is_word_byte(unsigned char c) {
    return std::isalnum(c) != 0 || c == '_' || c >= 0x80;
}

}  // namespace

std::size_t SimpleTokenizer::count(std::string_view text) const {
    std::size_t tokens = 0;
    bool in_word = false;
    for (unsigned char c : text) {
        if (is_word_byte(c)) {
            if (!in_word) ++tokens;
            in_word = true;
        } else {
            in_word = false;
            if (std::isspace(c) == 0) ++tokens;
        }
    }
    return tokens;
}

const Tokenizer& default_tokenizer() {
    static const SimpleTokenizer tokenizer;
    return tokenizer;
}

std::string sha256_hex(std::string_view data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        fail(ErrorKind::internal, "sha256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[md[i] >> 4]);
        out.push_back(kHex[md[i] & 0xf]);
    }
    return out;
}

}  // namespace charactergpt

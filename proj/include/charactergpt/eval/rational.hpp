#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <string_view>

namespace charactergpt::eval {

/// Exact fraction used for means so that half-up rounding never depends on
/// binary floating point (4.125 must round to 4.13).
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Rational of(std::int64_t n, std::int64_t d = 1) {
        if (d < 0) {
            n = -n;
            d = -d;
        }
        const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        return g > 1 ? Rational{n / g, d / g} : Rational{n, d};
    }

    Rational operator+(const Rational& o) const {
        const std::int64_t l = std::lcm(den, o.den);
        return of(num * (l / den) + o.num * (l / o.den), l);
    }
    Rational operator/(std::int64_t d) const { return of(num, den * d); }
    bool operator==(const Rational& o) const { return num * o.den == o.num * den; }

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Parses a plain decimal such as "4.26" or "-0.5" exactly. Returns false on
/// anything else.
inline bool parse_decimal(std::string_view text, Rational& out) {
    std::size_t i = 0;
    bool negative = false;
    if (i < text.size() && (text[i] == '-' || text[i] == '+')) negative = text[i++] == '-';
    std::int64_t num = 0, den = 1;
    bool digits = false, dot = false;
    for (; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '.' && !dot) {
            dot = true;
        } else if (c >= '0' && c <= '9') {
            num = num * 10 + (c - '0');
            if (dot) den *= 10;
            digits = true;
        } else {
            return false;
        }
    }
    if (!digits) return false;
    out = Rational::of(negative ? -num : num, den);
    return true;
}

/// Value scaled by 10^decimals and rounded half up, e.g. (4.125, 2) -> 413.
inline std::int64_t round_half_up_scaled(const Rational& r, int decimals) {
    std::int64_t scale = 1;
    for (int i = 0; i < decimals; ++i) scale *= 10;
    const std::int64_t n = 2 * r.num * scale + r.den;
    const std::int64_t d = 2 * r.den;
    std::int64_t q = n / d;
    if ((n % d != 0) && ((n < 0) != (d < 0))) --q;  // floor division
    return q;
}

/// "4.26" style rendering with a fixed number of decimals, rounded half up.
inline std::string format_fixed(const Rational& r, int decimals) {
    std::int64_t scaled = round_half_up_scaled(r, decimals);
    std::string sign = scaled < 0 ? "-" : "";
    if (scaled < 0) scaled = -scaled;
    std::string digits = std::to_string(scaled);
    if (decimals == 0) return sign + digits;
    if (digits.size() <= static_cast<std::size_t>(decimals)) {
        digits.insert(0, static_cast<std::size_t>(decimals) + 1 - digits.size(), '0');
    }
    digits.insert(digits.size() - static_cast<std::size_t>(decimals), ".");
    return sign + digits;
}

}  // namespace charactergpt::eval

#include "layersim/time.hpp"

#include <cctype>
#include <cstdio>

#include "layersim/rng.hpp"

namespace layersim {

std::optional<TimeMs> parse_seconds(std::string_view text) {
    if (text.empty()) {
        return std::nullopt;
    }
    std::size_t i = 0;
    bool negative = false;
    if (text[i] == '-') {
        negative = true;
        ++i;
    }
    if (i >= text.size()) {
        return std::nullopt;
    }
    std::int64_t whole = 0;
    bool any_digit = false;
    for (; i < text.size() && text[i] != '.'; ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) {
            return std::nullopt;
        }
        if (whole > (INT64_MAX - 9) / 10) {
            return std::nullopt;
        }
        whole = whole * 10 + (text[i] - '0');
        any_digit = true;
    }
    std::int64_t frac = 0;
    if (i < text.size()) { // at '.'
        ++i;
        std::size_t digits = 0;
        for (; i < text.size(); ++i, ++digits) {
            if (!std::isdigit(static_cast<unsigned char>(text[i])) || digits >= 3) {
                return std::nullopt; // sub-millisecond precision does not exist here
            }
            frac = frac * 10 + (text[i] - '0');
            any_digit = true;
        }
        for (; digits < 3; ++digits) {
            frac *= 10;
        }
    }
    if (!any_digit || whole > (INT64_MAX - frac) / 1000) {
        return std::nullopt;
    }
    const TimeMs ms = whole * 1000 + frac;
    return negative ? -ms : ms;
}

std::string format_seconds(TimeMs ms) {
    const bool negative = ms < 0;
    const TimeMs abs = negative ? -ms : ms;
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%s%lld.%03lld", negative ? "-" : "",
                  static_cast<long long>(abs / 1000), static_cast<long long>(abs % 1000));
    return buf;
}

TimeMs draw_start_time(const UniformDist& dist, Rng& rng) {
    return rng.range(dist.lo, dist.hi);
}

} // namespace layersim

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace layersim {

// All simulation clocks run on fixed-point milliseconds. Using an integer
// keeps event ordering and report output exactly reproducible; floating
// point only appears in derived statistics.
using TimeMs = std::int64_t;

constexpr TimeMs kMsPerSecond = 1000;

// "123.456" -> 123456 ms. Accepts up to three fractional digits; finer
// resolutions do not exist in this model and are rejected.
std::optional<TimeMs> parse_seconds(std::string_view text);

// 123456 -> "123.456". Always three fractional digits so logs line up.
std::string format_seconds(TimeMs ms);

inline double to_seconds(TimeMs ms) { return static_cast<double>(ms) / 1000.0; }

// Half-open interval [lo, hi) in milliseconds. lo == hi denotes the
// degenerate point distribution.
struct UniformDist {
    TimeMs lo = 0;
    TimeMs hi = 0;
    bool operator==(const UniformDist&) const = default;
};

class Rng;

// Start times (and interarrival gaps) are drawn uniformly from [lo, hi).
TimeMs draw_start_time(const UniformDist& dist, Rng& rng);

} // namespace layersim

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace layersim {

std::uint64_t fnv1a64(std::string_view s);
std::uint64_t splitmix64(std::uint64_t x);

// Thin wrapper over mt19937_64. The standard distributions are not pinned
// down across implementations, so every draw we depend on goes through the
// hand-rolled helpers below.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Unbiased draw in [0, bound) via rejection sampling. bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Draw in [lo, hi). lo == hi collapses to lo.
    std::int64_t range(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 engine_;
};

// Every random decision in a run comes from a substream keyed by the master
// seed plus a stable name ("workload.lan1.c3", "routing.lan1.c3.s0.a0", ...).
// Adding a consumer therefore never perturbs the draws of another, and the
// draws a session sees do not depend on event interleaving.
Rng substream(std::uint64_t master_seed, std::string_view name);

} // namespace layersim

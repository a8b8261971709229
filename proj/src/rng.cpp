#include "layersim/rng.hpp"

#include <cassert>

namespace layersim {

std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
    assert(bound > 0);
    // Rejection sampling: discard the sliver that would bias the modulus.
    const std::uint64_t reject_below = (-bound) % bound; // 2^64 mod bound
    std::uint64_t x = next();
    while (x < reject_below) {
        x = next();
    }
    return x % bound;
}

std::int64_t Rng::range(std::int64_t lo, std::int64_t hi) {
    if (lo >= hi) {
        return lo;
    }
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo);
    return lo + static_cast<std::int64_t>(below(span));
}

Rng substream(std::uint64_t master_seed, std::string_view name) {
    return Rng(splitmix64(master_seed ^ fnv1a64(name)));
}

} // namespace layersim

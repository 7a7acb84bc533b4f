#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace crowdtm {

// 64-bit FNV-1a, used for named RNG streams and config hashing.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a_u64(std::uint64_t x, std::uint64_t h = 0xcbf29ce484222325ull) {
    for (int i = 0; i < 8; ++i) {
        h ^= (x >> (8 * i)) & 0xffu;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Deterministic RNG stream derived from (master seed, purpose tag).
/// Changing how one stage consumes randomness never perturbs the others.
inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::string_view tag) {
    return std::mt19937_64(fnv1a(tag, fnv1a_u64(master_seed)));
}

inline std::mt19937_64 make_stream(std::uint64_t master_seed, std::string_view tag,
                                   std::uint64_t index) {
    return std::mt19937_64(fnv1a_u64(index, fnv1a(tag, fnv1a_u64(master_seed))));
}

inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace crowdtm

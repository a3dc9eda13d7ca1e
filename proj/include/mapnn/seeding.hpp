#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mapnn {

/// Independent 64-bit seed for the stream identified by (seed, path...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    for (auto p : path) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

inline std::mt19937_64 derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    return std::mt19937_64(derive_seed(seed, path));
}

}  // namespace mapnn

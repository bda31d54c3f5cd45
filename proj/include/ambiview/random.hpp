#pragma once

// Seed derivation. Every random stream in the library is keyed by
// (root seed, component name, index) so that results do not depend on the
// order or the thread in which streams are consumed.

#include <cstdint>
#include <random>
#include <string_view>

namespace ambiview {

using Rng = std::mt19937_64;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// seed' = splitmix64(splitmix64(root ^ fnv1a64(component)) + index)
inline constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view component, std::uint64_t index = 0) {
    return splitmix64(splitmix64(root ^ fnv1a64(component)) + index);
}

inline Rng make_rng(std::uint64_t root, std::string_view component, std::uint64_t index = 0) {
    return Rng(derive_seed(root, component, index));
}

} // namespace ambiview

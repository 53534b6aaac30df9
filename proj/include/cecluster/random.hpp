#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace cecluster {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
    std::uint64_t hash = 0xCBF29CE484222325ULL;
    for (const char c : text) {
        hash ^= static_cast<unsigned char>(c);
        hash *= 0x100000001B3ULL;
    }
    return hash;
}

}  // namespace detail

// Splittable seed derivation. A substream is identified by the master seed
// and a label such as "site/3" or "bootstrap/17":
//
//   derive_seed(seed, label) = splitmix64(seed ^ splitmix64(fnv1a64(label)))
//
// Any replicate can be re-run in isolation from (seed, label) alone.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) noexcept {
    return detail::splitmix64(seed ^ detail::splitmix64(detail::fnv1a64(label)));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view prefix, std::size_t index) {
    std::string label(prefix);
    label += '/';
    label += std::to_string(index);
    return derive_seed(seed, label);
}

inline Rng make_rng(std::uint64_t seed, std::string_view label) { return Rng(derive_seed(seed, label)); }

// Uniform on the open interval (0, 1) from the top 53 bits of the engine.
inline double uniform_open01(Rng& rng) {
    for (;;) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        if (u > 0.0) {
            return u;
        }
    }
}

}  // namespace cecluster

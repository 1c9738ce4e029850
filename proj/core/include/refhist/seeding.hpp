#pragma once

#include <cstdint>
#include <string_view>

namespace refhist {

// splitmix64: one master seed, many decorrelated streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Named sub-stream, e.g. derive_seed(master, "shuffle").
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view role) {
    return splitmix64(master ^ fnv1a64(role));
}

// Indexed sub-stream, e.g. one RNG per sample.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x51ed2701ULL));
}

}  // namespace refhist

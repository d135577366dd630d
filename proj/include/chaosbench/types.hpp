#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string_view>

namespace chaosbench {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

using Seed = std::uint64_t;

// SplitMix64 finalizer; used to derive per-task seeds from a master seed and
// task identity so results never depend on scheduling order.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr Seed derive_seed(Seed master, std::uint64_t a, std::uint64_t b = 0,
                           std::uint64_t c = 0, std::uint64_t d = 0) noexcept {
    Seed s = mix_seed(master);
    s = mix_seed(s ^ a);
    s = mix_seed(s ^ (b + 0x1000193ULL));
    s = mix_seed(s ^ (c + 0x100000001B3ULL));
    s = mix_seed(s ^ (d + 0xCBF29CE484222325ULL));
    return s;
}

// FNV-1a, stable across platforms; used for identity hashing and checksums.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace chaosbench

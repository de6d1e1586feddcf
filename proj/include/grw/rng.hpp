#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>

#include "grw/tensor.hpp"

namespace grw {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a root seed and a purpose label
// (FNV-1a over the label, mixed with the root through a splitmix64 finisher).
// Same inputs give the same seed on every platform.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose) {
    std::uint64_t h = 14695981039346656037ull;
    for (char c : purpose) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 1099511628211ull;
    }
    std::uint64_t z = root + 0x9e3779b97f4a7c15ull + h;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// The std:: distributions are implementation-defined, which would tie frozen
// test constants and regenerable datasets to one standard library. These
// draws depend only on the mt19937_64 bit stream.

// uniform in [0, n), unbiased via rejection
inline std::uint64_t uniform_u64(Rng& rng, std::uint64_t n) {
    if (n == 0) throw std::runtime_error("uniform_u64: empty range");
    const std::uint64_t rem = (0 - n) % n;  // 2^64 mod n
    for (;;) {
        const std::uint64_t x = rng();
        if (x >= rem) return (x - rem) % n;
    }
}

inline double uniform_double(Rng& rng) {  // [0, 1), 53-bit resolution
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double gauss(Rng& rng) {  // standard normal, Box-Muller
    const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform_double(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

inline Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = stddev * gauss(rng);
    return t;
}

}  // namespace grw

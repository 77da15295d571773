// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace taskscope {

// splitmix64 finalizer. Good enough avalanche that sequential guids behave
// like independent draws.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return mix64(a ^ mix64(b));
}

// Deterministic per-(guid, seed) sampling decision. The acceptance rate over
// many guids converges to `fraction`; querying the same pair twice always
// gives the same answer.
inline bool should_sample(std::uint64_t guid, double fraction, std::uint64_t seed) {
    if (fraction <= 0.0) return false;
    if (fraction >= 1.0) return true;
    const std::uint64_t h = mix64(guid, seed);
    // Compare against fraction * 2^64 without overflowing.
    const double scaled = fraction * 18446744073709551616.0;  // 2^64
    return static_cast<double>(h) < scaled;
}

}  // namespace taskscope

// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <doctest.h>

#include "taskscope/sampling.hpp"

using namespace taskscope;

TEST_SUITE("sampling") {

TEST_CASE("fraction extremes are absolute") {
    for (std::uint64_t g = 0; g < 1000; ++g) {
        CHECK(!should_sample(g, 0.0, 42));
        CHECK(should_sample(g, 1.0, 42));
    }
}

TEST_CASE("decisions are deterministic per guid and seed") {
    for (std::uint64_t g = 0; g < 1000; ++g) {
        CHECK(should_sample(g, 0.3, 7) == should_sample(g, 0.3, 7));
    }
}

TEST_CASE("acceptance rate converges within the binomial bound") {
    // fraction 0.01 over 1e5 guids: 1000 ± 4·sqrt(1e5·0.01·0.99) → [874, 1126].
    const double fraction = 0.01;
    const std::uint64_t n = 100'000;
    std::uint64_t accepted = 0;
    for (std::uint64_t g = 1; g <= n; ++g) {
        if (should_sample(g, fraction, 12345)) ++accepted;
    }
    CHECK(accepted >= 874);
    CHECK(accepted <= 1126);
}

TEST_CASE("seeds decorrelate the sampled sets") {
    // The same guid population under two seeds should overlap near
    // fraction² of the population, not near fraction.
    const double fraction = 0.05;
    const std::uint64_t n = 100'000;
    std::uint64_t overlap = 0;
    for (std::uint64_t g = 1; g <= n; ++g) {
        if (should_sample(g, fraction, 1) && should_sample(g, fraction, 2)) ++overlap;
    }
    // Expected 250 under independence; 4σ ≈ 63. Far below n·fraction = 5000.
    CHECK(overlap <= 1000);
}

TEST_CASE("mix64 spreads sequential inputs") {
    // Distinctness over a contiguous range (collision would break sampling).
    const std::uint64_t n = 100'000;
    std::uint64_t xor_fold = 0;
    for (std::uint64_t g = 0; g < n; ++g) xor_fold ^= mix64(g);
    CHECK(xor_fold != 0);  // smoke: not degenerate
    CHECK(mix64(1) != mix64(2));
    CHECK(mix64(0) != 0);
}

}  // TEST_SUITE

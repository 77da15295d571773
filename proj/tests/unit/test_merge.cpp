// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <random>

#include <doctest.h>

#include "taskscope/snapshot.hpp"

using namespace taskscope;

namespace {

// Random snapshot with integer-valued doubles so sums are IEEE-exact under
// any summation order.
Snapshot random_snapshot(std::mt19937_64& rng, std::int32_t rank) {
    std::uniform_int_distribution<int> small(0, 4);
    std::uniform_int_distribution<std::uint64_t> dur(1, 1'000'000);
    std::uniform_int_distribution<int> value(0, 1000);
    const char* names[] = {"flux", "reconstruct", "multipole", "p2p", "step"};

    Snapshot s;
    s.rank = rank;
    int entries = small(rng) + 1;
    for (int i = 0; i < entries; ++i) {
        const char* name = names[small(rng)];
        auto& e = s.profile[name];
        std::uint64_t calls = small(rng) + 1;
        for (std::uint64_t c = 0; c < calls; ++c) {
            std::uint64_t d = dur(rng);
            if (e.calls == 0) {
                e.min_ns = d;
                e.max_ns = d;
            } else {
                e.min_ns = std::min(e.min_ns, d);
                e.max_ns = std::max(e.max_ns, d);
            }
            ++e.calls;
            e.total_active_ns += d;
        }
        e.total_yields += small(rng);
    }
    int counters = small(rng);
    for (int i = 0; i < counters; ++i) {
        auto& c = s.counters[names[small(rng)]];
        int n = small(rng) + 1;
        for (int k = 0; k < n; ++k) {
            double v = value(rng);
            std::uint64_t ts = dur(rng);
            if (c.count == 0) {
                c.min = v;
                c.max = v;
            } else {
                c.min = std::min(c.min, v);
                c.max = std::max(c.max, v);
            }
            ++c.count;
            c.sum += v;
            c.samples.push_back({ts, v});
            if (ts > c.last_ts_ns || (ts == c.last_ts_ns && v > c.last)) {
                c.last_ts_ns = ts;
                c.last = v;
            }
        }
    }
    int scatters = small(rng);
    for (int i = 0; i < scatters; ++i) {
        s.scatter.push_back({names[small(rng)], dur(rng), dur(rng)});
    }
    if (small(rng) > 2) s.edges[{"step", names[small(rng)]}] += small(rng) + 1;
    int acts = small(rng);
    for (int i = 0; i < acts; ++i) {
        ActivityRecord r;
        r.name = names[small(rng)];
        r.stream_id = small(rng);
        r.start_ns = dur(rng);
        r.end_ns = r.start_ns + dur(rng);
        r.correlation_guid = dur(rng);
        s.activity.push_back(r);
    }
    return s;
}

}  // namespace

TEST_SUITE("merge") {

TEST_CASE("two entries with the same name combine calls and totals") {
    Snapshot a, b;
    a.rank = 0;
    b.rank = 1;
    a.profile["X"] = {3, 30'000'000, 9'000'000, 11'000'000, 0};
    b.profile["X"] = {1, 10'000'000, 10'000'000, 10'000'000, 2};
    Snapshot m = merge_profiles(a, b);
    CHECK(m.rank == kMergedRank);
    const auto& x = m.profile.at("X");
    CHECK(x.calls == 4);
    CHECK(x.total_active_ns == 40'000'000);
    CHECK(x.mean_ns() == doctest::Approx(10'000'000.0));
    CHECK(x.min_ns == 9'000'000);
    CHECK(x.max_ns == 11'000'000);
    CHECK(x.total_yields == 2);
}

TEST_CASE("the empty snapshot is the merge identity") {
    std::mt19937_64 rng(11);
    Snapshot a = random_snapshot(rng, 2);
    Snapshot empty;
    CHECK(merge_profiles(a, empty) == a);
    CHECK(merge_profiles(empty, a) == a);
    Snapshot both = merge_profiles(empty, Snapshot{});
    CHECK(both.empty());
}

TEST_CASE("counter series merge combines weighted stats") {
    Snapshot a, b;
    auto& ca = a.counters["mem"];
    ca.count = 2;
    ca.min = 1.0;
    ca.max = 5.0;
    ca.sum = 6.0;
    ca.last = 5.0;
    ca.last_ts_ns = 100;
    ca.samples = {{50, 1.0}, {100, 5.0}};
    auto& cb = b.counters["mem"];
    cb.count = 1;
    cb.min = 9.0;
    cb.max = 9.0;
    cb.sum = 9.0;
    cb.last = 9.0;
    cb.last_ts_ns = 70;
    cb.samples = {{70, 9.0}};

    Snapshot m = merge_profiles(a, b);
    const auto& c = m.counters.at("mem");
    CHECK(c.count == 3);
    CHECK(c.min == 1.0);
    CHECK(c.max == 9.0);
    CHECK(c.mean() == doctest::Approx(5.0));
    CHECK(c.last == 5.0);  // ts 100 beats ts 70 despite merge order
    REQUIRE(c.samples.size() == 3);
    CHECK(c.samples[0].ts_ns == 50);
    CHECK(c.samples[1].ts_ns == 70);
    CHECK(c.samples[2].ts_ns == 100);
}

TEST_CASE("merge is commutative") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        Snapshot a = random_snapshot(rng, 0);
        Snapshot b = random_snapshot(rng, 1);
        CHECK(merge_profiles(a, b) == merge_profiles(b, a));
    }
}

TEST_CASE("folds in different association orders are field-identical") {
    std::mt19937_64 rng(31);
    const int k = 8;
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<Snapshot> parts;
        for (int i = 0; i < k; ++i) parts.push_back(random_snapshot(rng, i));

        // Left fold.
        Snapshot left;
        for (const auto& p : parts) left = merge_profiles(left, p);
        // Right fold.
        Snapshot right;
        for (auto it = parts.rbegin(); it != parts.rend(); ++it)
            right = merge_profiles(*it, right);
        // Shuffled pairwise fold.
        std::vector<Snapshot> pool = parts;
        std::shuffle(pool.begin(), pool.end(), rng);
        while (pool.size() > 1) {
            Snapshot m = merge_profiles(pool[0], pool[1]);
            pool.erase(pool.begin(), pool.begin() + 2);
            pool.push_back(std::move(m));
        }

        CHECK(left == right);
        CHECK(left == pool[0]);
    }
}

}  // TEST_SUITE

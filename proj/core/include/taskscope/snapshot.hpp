// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "taskscope/identity.hpp"

namespace taskscope {

// Aggregate statistics for one task name with the time axis collapsed.
struct FlatProfileEntry {
    std::uint64_t calls = 0;
    std::uint64_t total_active_ns = 0;
    std::uint64_t min_ns = 0;
    std::uint64_t max_ns = 0;
    std::uint64_t total_yields = 0;

    double mean_ns() const {
        return calls == 0 ? 0.0 : static_cast<double>(total_active_ns) / static_cast<double>(calls);
    }

    bool operator==(const FlatProfileEntry&) const = default;
};

struct CounterSample {
    std::uint64_t ts_ns = 0;
    double value = 0.0;

    bool operator==(const CounterSample&) const = default;
};

// Full sample series plus running stats for one counter name.
struct CounterSeries {
    std::uint64_t count = 0;
    double min = 0.0;
    double max = 0.0;
    double sum = 0.0;
    double last = 0.0;
    std::uint64_t last_ts_ns = 0;
    std::vector<CounterSample> samples;

    double mean() const { return count == 0 ? 0.0 : sum / static_cast<double>(count); }

    bool operator==(const CounterSeries&) const = default;
};

// One sampled task instance: when it first ran and how long it was active.
struct ScatterSample {
    std::string name;
    std::uint64_t start_ns = 0;
    std::uint64_t duration_ns = 0;

    bool operator==(const ScatterSample&) const = default;
};

// One contiguous active interval of a task on one worker. A task that never
// yields has exactly one segment.
struct Segment {
    Guid guid = 0;
    Guid parent_guid = 0;
    std::string name;
    std::int32_t worker = -1;
    std::uint64_t start_ns = 0;
    std::uint64_t end_ns = 0;

    bool operator==(const Segment&) const = default;
};

enum class ActivityKind : std::uint8_t {
    kernel = 0,
    copy_host_to_device = 1,
    copy_device_to_host = 2,
    copy_device_to_device = 3,
    alloc = 4,
    free = 5,
};

const char* to_string(ActivityKind kind);

// Asynchronously delivered device-side event with stream attribution.
struct ActivityRecord {
    ActivityKind kind = ActivityKind::kernel;
    std::string name;
    std::int32_t device_id = 0;
    std::int32_t stream_id = 0;
    std::uint64_t start_ns = 0;
    std::uint64_t end_ns = 0;
    std::optional<std::uint64_t> bytes;
    Guid correlation_guid = 0;

    bool operator==(const ActivityRecord&) const = default;
};

// Merged snapshots carry this rank: the data no longer belongs to one
// locality.
inline constexpr std::int32_t kMergedRank = -1;

// Self-consistent copy of everything one locality measured.
struct Snapshot {
    std::int32_t rank = 0;
    std::map<std::string, FlatProfileEntry> profile;
    std::map<std::string, CounterSeries> counters;
    std::vector<ScatterSample> scatter;
    // (parent task name, child task name) -> spawn count, over stopped tasks.
    std::map<std::pair<std::string, std::string>, std::uint64_t> edges;
    std::vector<Segment> segments;
    std::vector<ActivityRecord> activity;

    bool empty() const {
        return profile.empty() && counters.empty() && scatter.empty() && edges.empty() &&
               segments.empty() && activity.empty();
    }

    bool operator==(const Snapshot&) const = default;
};

// One snapshot per locality, in rank order.
using RunProfile = std::vector<Snapshot>;

// Associative, commutative fold of two snapshots; the empty snapshot is the
// identity. Vector-valued fields are canonically sorted so that any fold
// order produces a field-identical result.
Snapshot merge_profiles(const Snapshot& a, const Snapshot& b);

// Canonical ordering used by merge_profiles; exposed so independently built
// snapshots can be normalized before comparison.
void canonicalize(Snapshot& s);

}  // namespace taskscope

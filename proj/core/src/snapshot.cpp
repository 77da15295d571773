// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/snapshot.hpp"

#include <algorithm>
#include <tuple>

namespace taskscope {

const char* to_string(ActivityKind kind) {
    switch (kind) {
        case ActivityKind::kernel: return "kernel";
        case ActivityKind::copy_host_to_device: return "copy_host_to_device";
        case ActivityKind::copy_device_to_host: return "copy_device_to_host";
        case ActivityKind::copy_device_to_device: return "copy_device_to_device";
        case ActivityKind::alloc: return "alloc";
        case ActivityKind::free: return "free";
    }
    return "unknown";
}

namespace {

void merge_entry(FlatProfileEntry& into, const FlatProfileEntry& from) {
    if (from.calls == 0) return;
    if (into.calls == 0) {
        into = from;
        return;
    }
    into.calls += from.calls;
    into.total_active_ns += from.total_active_ns;
    into.min_ns = std::min(into.min_ns, from.min_ns);
    into.max_ns = std::max(into.max_ns, from.max_ns);
    into.total_yields += from.total_yields;
}

void merge_series(CounterSeries& into, const CounterSeries& from) {
    if (from.count == 0) return;
    if (into.count == 0) {
        into = from;
        return;
    }
    into.count += from.count;
    into.min = std::min(into.min, from.min);
    into.max = std::max(into.max, from.max);
    into.sum += from.sum;
    // Latest sample wins; ties resolve toward the larger value for a
    // deterministic, order-independent result.
    if (std::tuple(from.last_ts_ns, from.last) > std::tuple(into.last_ts_ns, into.last)) {
        into.last_ts_ns = from.last_ts_ns;
        into.last = from.last;
    }
    into.samples.insert(into.samples.end(), from.samples.begin(), from.samples.end());
}

}  // namespace

void canonicalize(Snapshot& s) {
    for (auto& [name, series] : s.counters) {
        std::sort(series.samples.begin(), series.samples.end(),
                  [](const CounterSample& a, const CounterSample& b) {
                      return std::tuple(a.ts_ns, a.value) < std::tuple(b.ts_ns, b.value);
                  });
    }
    std::sort(s.scatter.begin(), s.scatter.end(),
              [](const ScatterSample& a, const ScatterSample& b) {
                  return std::tuple(a.name, a.start_ns, a.duration_ns) <
                         std::tuple(b.name, b.start_ns, b.duration_ns);
              });
    // Keys cover every field so the order is total and any fold order lands
    // on the identical arrangement.
    std::sort(s.segments.begin(), s.segments.end(), [](const Segment& a, const Segment& b) {
        return std::tuple(a.start_ns, a.end_ns, a.guid, a.parent_guid, a.worker, a.name) <
               std::tuple(b.start_ns, b.end_ns, b.guid, b.parent_guid, b.worker, b.name);
    });
    std::sort(s.activity.begin(), s.activity.end(),
              [](const ActivityRecord& a, const ActivityRecord& b) {
                  return std::tuple(a.start_ns, a.end_ns, a.device_id, a.stream_id, a.name,
                                    static_cast<int>(a.kind), a.correlation_guid,
                                    a.bytes.value_or(0), a.bytes.has_value()) <
                         std::tuple(b.start_ns, b.end_ns, b.device_id, b.stream_id, b.name,
                                    static_cast<int>(b.kind), b.correlation_guid,
                                    b.bytes.value_or(0), b.bytes.has_value());
              });
}

Snapshot merge_profiles(const Snapshot& a, const Snapshot& b) {
    if (a.empty() && b.empty()) {
        Snapshot out;
        out.rank = kMergedRank;
        return out;
    }
    // Merging with the empty snapshot preserves the other side untouched,
    // including its rank: empty is the identity.
    if (a.empty()) return b;
    if (b.empty()) return a;

    Snapshot out = a;
    out.rank = kMergedRank;
    for (const auto& [name, entry] : b.profile) merge_entry(out.profile[name], entry);
    for (const auto& [name, series] : b.counters) merge_series(out.counters[name], series);
    out.scatter.insert(out.scatter.end(), b.scatter.begin(), b.scatter.end());
    for (const auto& [key, count] : b.edges) out.edges[key] += count;
    out.segments.insert(out.segments.end(), b.segments.begin(), b.segments.end());
    out.activity.insert(out.activity.end(), b.activity.begin(), b.activity.end());
    canonicalize(out);
    return out;
}

}  // namespace taskscope

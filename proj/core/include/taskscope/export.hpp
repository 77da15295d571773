// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "taskscope/bytes.hpp"
#include "taskscope/snapshot.hpp"

namespace taskscope {

// --- Google Trace Events -----------------------------------------------------
//
// Array-form JSON, "X" events for task segments and device activity, "C"
// events for counter samples. Timestamps are converted ns -> us. CPU segments
// land on tid = worker id; device records land on a synthetic stream lane
// tid = 10000 + device_id * 1000 + stream_id (alloc/free, which have no
// stream, use lane offset 999). pid is the locality rank.

// Writes one JSON array covering every snapshot in the run. Returns the
// number of events emitted.
std::uint64_t write_trace_events(const RunProfile& run, std::ostream& out);
std::uint64_t write_trace_events(const RunProfile& run, const std::string& path);

// --- CSV ---------------------------------------------------------------------

// Columns: rank,name,calls,total_ns,mean_ns,min_ns,max_ns,yields. One row per
// (rank, task name); header always present. Returns the data-row count.
std::uint64_t write_profile_csv(const RunProfile& run, std::ostream& out);
std::uint64_t write_profile_csv(const RunProfile& run, const std::string& path);

// Columns: rank,name,start_ns,duration_ns. One row per scatter sample.
std::uint64_t write_scatter_csv(const RunProfile& run, std::ostream& out);
std::uint64_t write_scatter_csv(const RunProfile& run, const std::string& path);

// Inverse of write_profile_csv: one snapshot per distinct rank, rank order.
// mean_ns is ignored on input (it is derived). Malformed input throws
// std::runtime_error naming the offending line.
RunProfile read_profile_csv(std::istream& in);
RunProfile read_profile_csv(const std::string& path);

// --- DOT ---------------------------------------------------------------------

struct GraphCounts {
    std::uint64_t nodes = 0;
    std::uint64_t edges = 0;

    bool operator==(const GraphCounts&) const = default;
};

// One node per task name (labelled with calls and mean), one edge per
// (parent name -> child name) labelled with the spawn count. Output is fully
// sorted, so identical snapshots produce byte-identical files.
GraphCounts write_taskgraph_dot(const Snapshot& snapshot, std::ostream& out);
GraphCounts write_taskgraph_dot(const Snapshot& snapshot, const std::string& path);

// --- Profile diff ------------------------------------------------------------

struct ProfileDiffRow {
    std::string name;
    std::uint64_t calls_a = 0;
    std::uint64_t calls_b = 0;
    double mean_a_ns = 0.0;
    double mean_b_ns = 0.0;
    // mean_a / mean_b; 0.0 for one-sided rows, which have no ratio.
    double mean_ratio = 0.0;
    bool flagged = false;
    bool one_sided = false;

    bool operator==(const ProfileDiffRow&) const = default;
};

// Compares the flat profiles of two snapshots. Rows present on both sides
// come first, sorted by descending |log(mean_ratio)|; a row is flagged when
// its ratio falls outside [1/threshold, threshold]. One-sided names follow,
// alphabetically. Requires threshold > 1.
std::vector<ProfileDiffRow> diff_profiles(const Snapshot& a, const Snapshot& b,
                                          double threshold);

// --- Binary snapshot codec ---------------------------------------------------
//
// Layout: magic "TSCP", version byte 1, then the snapshot fields; integers
// little-endian, doubles as IEEE-754 bit patterns, strings length-prefixed
// (u32). decode is the exact inverse of encode.

inline constexpr std::uint8_t kCodecVersion = 1;

std::vector<std::uint8_t> encode_snapshot(const Snapshot& snapshot);

// Decodes one snapshot starting at `data`. On success stores the number of
// bytes consumed in *consumed (when non-null); on malformed input throws
// CodecError.
Snapshot decode_snapshot(const std::uint8_t* data, std::size_t size,
                         std::size_t* consumed = nullptr);

// Strict variant: the buffer must contain exactly one snapshot.
Snapshot decode_snapshot(const std::vector<std::uint8_t>& bytes);

// A snapshot file is simply concatenated encoded snapshots.
void write_snapshot_file(const RunProfile& run, const std::string& path);
RunProfile read_snapshot_file(const std::string& path);

}  // namespace taskscope

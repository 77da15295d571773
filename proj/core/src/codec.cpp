// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/export.hpp"

#include <fstream>
#include <iterator>

namespace taskscope {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'C', 'P'};

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const Snapshot& s) {
    ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u8(kCodecVersion);
    w.i32(s.rank);

    w.u32(static_cast<std::uint32_t>(s.profile.size()));
    for (const auto& [name, e] : s.profile) {
        w.str(name);
        w.u64(e.calls);
        w.u64(e.total_active_ns);
        w.u64(e.min_ns);
        w.u64(e.max_ns);
        w.u64(e.total_yields);
    }

    w.u32(static_cast<std::uint32_t>(s.counters.size()));
    for (const auto& [name, series] : s.counters) {
        w.str(name);
        w.u64(series.count);
        w.f64(series.min);
        w.f64(series.max);
        w.f64(series.sum);
        w.f64(series.last);
        w.u64(series.last_ts_ns);
        w.u32(static_cast<std::uint32_t>(series.samples.size()));
        for (const CounterSample& sample : series.samples) {
            w.u64(sample.ts_ns);
            w.f64(sample.value);
        }
    }

    w.u32(static_cast<std::uint32_t>(s.scatter.size()));
    for (const ScatterSample& sample : s.scatter) {
        w.str(sample.name);
        w.u64(sample.start_ns);
        w.u64(sample.duration_ns);
    }

    w.u32(static_cast<std::uint32_t>(s.edges.size()));
    for (const auto& [edge, count] : s.edges) {
        w.str(edge.first);
        w.str(edge.second);
        w.u64(count);
    }

    w.u32(static_cast<std::uint32_t>(s.segments.size()));
    for (const Segment& seg : s.segments) {
        w.u64(seg.guid);
        w.u64(seg.parent_guid);
        w.str(seg.name);
        w.i32(seg.worker);
        w.u64(seg.start_ns);
        w.u64(seg.end_ns);
    }

    w.u32(static_cast<std::uint32_t>(s.activity.size()));
    for (const ActivityRecord& rec : s.activity) {
        w.u8(static_cast<std::uint8_t>(rec.kind));
        w.str(rec.name);
        w.i32(rec.device_id);
        w.i32(rec.stream_id);
        w.u64(rec.start_ns);
        w.u64(rec.end_ns);
        w.u8(rec.bytes.has_value() ? 1 : 0);
        if (rec.bytes) w.u64(*rec.bytes);
        w.u64(rec.correlation_guid);
    }

    return w.take();
}

Snapshot decode_snapshot(const std::uint8_t* data, std::size_t size, std::size_t* consumed) {
    ByteReader r(data, size);
    for (char expected : kMagic) {
        const std::size_t at = r.pos();
        if (r.u8("magic") != static_cast<std::uint8_t>(expected))
            throw CodecError("bad magic", at);
    }
    {
        const std::size_t at = r.pos();
        const std::uint8_t version = r.u8("version");
        if (version != kCodecVersion)
            throw CodecError("unsupported codec version " + std::to_string(version), at);
    }

    Snapshot s;
    s.rank = r.i32("rank");

    const std::uint32_t n_profile = r.u32("profile count");
    for (std::uint32_t i = 0; i < n_profile; ++i) {
        std::string name = r.str("profile name");
        FlatProfileEntry e;
        e.calls = r.u64("profile calls");
        e.total_active_ns = r.u64("profile total");
        e.min_ns = r.u64("profile min");
        e.max_ns = r.u64("profile max");
        e.total_yields = r.u64("profile yields");
        s.profile.emplace(std::move(name), e);
    }

    const std::uint32_t n_counters = r.u32("counter count");
    for (std::uint32_t i = 0; i < n_counters; ++i) {
        std::string name = r.str("counter name");
        CounterSeries series;
        series.count = r.u64("counter sample count");
        series.min = r.f64("counter min");
        series.max = r.f64("counter max");
        series.sum = r.f64("counter sum");
        series.last = r.f64("counter last");
        series.last_ts_ns = r.u64("counter last ts");
        const std::uint32_t n_samples = r.u32("counter series length");
        series.samples.reserve(std::min<std::uint32_t>(n_samples, 1u << 20));
        for (std::uint32_t k = 0; k < n_samples; ++k) {
            CounterSample sample;
            sample.ts_ns = r.u64("sample ts");
            sample.value = r.f64("sample value");
            series.samples.push_back(sample);
        }
        s.counters.emplace(std::move(name), std::move(series));
    }

    const std::uint32_t n_scatter = r.u32("scatter count");
    for (std::uint32_t i = 0; i < n_scatter; ++i) {
        ScatterSample sample;
        sample.name = r.str("scatter name");
        sample.start_ns = r.u64("scatter start");
        sample.duration_ns = r.u64("scatter duration");
        s.scatter.push_back(std::move(sample));
    }

    const std::uint32_t n_edges = r.u32("edge count");
    for (std::uint32_t i = 0; i < n_edges; ++i) {
        std::string parent = r.str("edge parent");
        std::string child = r.str("edge child");
        const std::uint64_t count = r.u64("edge weight");
        s.edges.emplace(std::pair(std::move(parent), std::move(child)), count);
    }

    const std::uint32_t n_segments = r.u32("segment count");
    for (std::uint32_t i = 0; i < n_segments; ++i) {
        Segment seg;
        seg.guid = r.u64("segment guid");
        seg.parent_guid = r.u64("segment parent guid");
        seg.name = r.str("segment name");
        seg.worker = r.i32("segment worker");
        seg.start_ns = r.u64("segment start");
        seg.end_ns = r.u64("segment end");
        s.segments.push_back(std::move(seg));
    }

    const std::uint32_t n_activity = r.u32("activity count");
    for (std::uint32_t i = 0; i < n_activity; ++i) {
        ActivityRecord rec;
        const std::size_t kind_at = r.pos();
        const std::uint8_t kind = r.u8("activity kind");
        if (kind > static_cast<std::uint8_t>(ActivityKind::free))
            throw CodecError("invalid activity kind " + std::to_string(kind), kind_at);
        rec.kind = static_cast<ActivityKind>(kind);
        rec.name = r.str("activity name");
        rec.device_id = r.i32("activity device");
        rec.stream_id = r.i32("activity stream");
        rec.start_ns = r.u64("activity start");
        rec.end_ns = r.u64("activity end");
        const std::size_t flag_at = r.pos();
        const std::uint8_t has_bytes = r.u8("activity bytes flag");
        if (has_bytes > 1)
            throw CodecError("invalid activity bytes flag " + std::to_string(has_bytes), flag_at);
        if (has_bytes) rec.bytes = r.u64("activity bytes");
        rec.correlation_guid = r.u64("activity correlation guid");
        s.activity.push_back(std::move(rec));
    }

    if (consumed) *consumed = r.pos();
    return s;
}

Snapshot decode_snapshot(const std::vector<std::uint8_t>& bytes) {
    std::size_t consumed = 0;
    Snapshot s = decode_snapshot(bytes.data(), bytes.size(), &consumed);
    if (consumed != bytes.size()) throw CodecError("trailing bytes after snapshot", consumed);
    return s;
}

void write_snapshot_file(const RunProfile& run, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    for (const Snapshot& s : run) {
        const std::vector<std::uint8_t> bytes = encode_snapshot(s);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw std::runtime_error("snapshot write failed: " + path);
}

RunProfile read_snapshot_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                          std::istreambuf_iterator<char>());
    RunProfile run;
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        std::size_t consumed = 0;
        run.push_back(decode_snapshot(bytes.data() + pos, bytes.size() - pos, &consumed));
        pos += consumed;
    }
    return run;
}

}  // namespace taskscope

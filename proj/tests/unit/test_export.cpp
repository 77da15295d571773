// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/export.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include <doctest.h>
#include <json.hpp>

using namespace taskscope;

namespace {

// Covers every snapshot field, including doubles with non-trivial bit
// patterns; the codec must reproduce them exactly.
Snapshot random_snapshot(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::uint64_t> u64(0, 1'000'000'000);
    std::uniform_real_distribution<double> real(-1e6, 1e6);
    std::uniform_int_distribution<int> small(0, 4);
    const char* names[] = {"flux", "reconstruct", "multipole", "p2p", "step"};

    Snapshot s;
    s.rank = small(rng);
    for (int i = 0; i <= small(rng); ++i) {
        FlatProfileEntry e;
        e.calls = 1 + u64(rng) % 100;
        e.total_active_ns = u64(rng);
        e.min_ns = u64(rng);
        e.max_ns = u64(rng);
        e.total_yields = u64(rng) % 50;
        s.profile[names[i]] = e;
    }
    for (int i = 0; i <= small(rng); ++i) {
        CounterSeries series;
        series.count = u64(rng) % 1000;
        series.min = real(rng);
        series.max = real(rng);
        series.sum = real(rng);
        series.last = real(rng);
        series.last_ts_ns = u64(rng);
        for (int k = 0; k < small(rng); ++k) series.samples.push_back({u64(rng), real(rng)});
        s.counters["counter." + std::to_string(i)] = std::move(series);
    }
    for (int i = 0; i < small(rng); ++i) s.scatter.push_back({names[small(rng)], u64(rng), u64(rng)});
    for (int i = 0; i < small(rng); ++i)
        s.edges[{names[small(rng)], names[small(rng)]}] += 1 + u64(rng) % 7;
    for (int i = 0; i < small(rng); ++i) {
        Segment seg;
        seg.guid = 1 + u64(rng);
        seg.parent_guid = u64(rng) % 3;
        seg.name = names[small(rng)];
        seg.worker = small(rng) - 1;
        seg.start_ns = u64(rng);
        seg.end_ns = seg.start_ns + u64(rng) % 1'000'000;
        s.segments.push_back(std::move(seg));
    }
    for (int i = 0; i < small(rng); ++i) {
        ActivityRecord rec;
        rec.kind = static_cast<ActivityKind>(u64(rng) % 6);
        rec.name = names[small(rng)];
        rec.device_id = small(rng);
        rec.stream_id = small(rng) - 1;
        rec.start_ns = u64(rng);
        rec.end_ns = rec.start_ns + u64(rng) % 1'000'000;
        if (u64(rng) % 2) rec.bytes = u64(rng);
        rec.correlation_guid = u64(rng);
        s.activity.push_back(std::move(rec));
    }
    return s;
}

std::string render_trace(const RunProfile& run, std::uint64_t* count = nullptr) {
    std::ostringstream out;
    const std::uint64_t n = write_trace_events(run, out);
    if (count) *count = n;
    return out.str();
}

}  // namespace

TEST_SUITE("export") {

TEST_CASE("trace: unit conversion and single-segment timer") {
    Snapshot s;
    s.rank = 0;
    s.segments.push_back({7, 0, "flux", 2, 1000, 3500});
    std::uint64_t count = 0;
    const std::string text = render_trace({s}, &count);
    CHECK(count == 1);

    const nlohmann::json j = nlohmann::json::parse(text);
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 1);
    const auto& e = j[0];
    CHECK(e["name"] == "flux");
    CHECK(e["ph"] == "X");
    CHECK(e["ts"].get<double>() == 1.0);
    CHECK(e["dur"].get<double>() == 2.5);
    CHECK(e["pid"] == 0);
    CHECK(e["tid"] == 2);
    CHECK(e["args"]["guid"] == 7);
}

TEST_CASE("trace: a yielded task emits one X event per segment, sharing the guid") {
    Snapshot s;
    s.segments.push_back({9, 1, "step", 0, 1000, 2000});
    s.segments.push_back({9, 1, "step", 1, 5000, 9000});
    const nlohmann::json j = nlohmann::json::parse(render_trace({s}));
    REQUIRE(j.size() == 2);
    CHECK(j[0]["args"]["guid"] == 9);
    CHECK(j[1]["args"]["guid"] == 9);
    CHECK(j[0]["args"]["parent_guid"] == 1);
    CHECK(j[0]["tid"] != j[1]["tid"]);
}

TEST_CASE("trace: counter series of k samples becomes k C events with non-decreasing ts") {
    Snapshot s;
    CounterSeries series;
    for (int i = 0; i < 17; ++i) series.samples.push_back({static_cast<std::uint64_t>(100 * i), 1.5 * i});
    series.count = 17;
    s.counters["os.rss_bytes"] = series;

    const nlohmann::json j = nlohmann::json::parse(render_trace({s}));
    REQUIRE(j.size() == 17);
    double last_ts = -1.0;
    for (const auto& e : j) {
        CHECK(e["ph"] == "C");
        CHECK(e["name"] == "os.rss_bytes");
        REQUIRE(e["args"].contains("value"));
        CHECK(e["args"]["value"].is_number());
        const double ts = e["ts"].get<double>();
        CHECK(ts >= last_ts);
        last_ts = ts;
    }
}

TEST_CASE("trace: device activity lands on synthetic stream lanes") {
    Snapshot s;
    s.rank = 2;
    ActivityRecord kernel;
    kernel.kind = ActivityKind::kernel;
    kernel.name = "flux_kernel";
    kernel.device_id = 1;
    kernel.stream_id = 17;
    kernel.start_ns = 4000;
    kernel.end_ns = 9000;
    kernel.correlation_guid = 55;
    ActivityRecord copy;
    copy.kind = ActivityKind::copy_device_to_device;
    copy.name = "halo";
    copy.device_id = 0;
    copy.stream_id = 3;
    copy.start_ns = 1000;
    copy.end_ns = 1500;
    copy.bytes = 4096;
    s.activity = {kernel, copy};

    const nlohmann::json j = nlohmann::json::parse(render_trace({s}));
    REQUIRE(j.size() == 2);
    // Global order sorts by tid: device 0 stream 3 first.
    CHECK(j[0]["tid"] == 10003);
    CHECK(j[0]["cat"] == "copy_device_to_device");
    CHECK(j[0]["args"]["bytes"] == 4096);
    CHECK(j[1]["tid"] == 11017);
    CHECK(j[1]["args"]["guid"] == 55);
    CHECK(j[1]["pid"] == 2);
}

TEST_CASE("trace: required fields, non-negative dur, per-lane ts order") {
    RunProfile run;
    for (std::uint64_t seed = 1; seed <= 4; ++seed) run.push_back(random_snapshot(seed));
    std::uint64_t count = 0;
    const nlohmann::json j = nlohmann::json::parse(render_trace(run, &count));
    REQUIRE(j.is_array());
    CHECK(j.size() == count);

    std::map<std::pair<std::int64_t, std::int64_t>, double> last_ts;
    for (const auto& e : j) {
        REQUIRE(e.contains("name"));
        REQUIRE(e.contains("ph"));
        REQUIRE(e.contains("ts"));
        REQUIRE(e.contains("pid"));
        REQUIRE(e.contains("tid"));
        if (e["ph"] == "X") {
            CHECK(e["dur"].get<double>() >= 0.0);
            auto& prev = last_ts
                .try_emplace({e["pid"].get<std::int64_t>(), e["tid"].get<std::int64_t>()}, -1.0)
                .first->second;
            CHECK(e["ts"].get<double>() >= prev);
            prev = e["ts"].get<double>();
        }
    }
}

TEST_CASE("trace: byte-identical across repeated writes") {
    RunProfile run;
    for (std::uint64_t seed = 10; seed <= 13; ++seed) run.push_back(random_snapshot(seed));
    CHECK(render_trace(run) == render_trace(run));
}

TEST_CASE("profile CSV: pinned format") {
    Snapshot s;
    s.rank = 3;
    s.profile["flux_kernel"] = {4, 10000, 2000, 3000, 2};
    std::ostringstream out;
    CHECK(write_profile_csv({s}, out) == 1);
    CHECK(out.str() ==
          "rank,name,calls,total_ns,mean_ns,min_ns,max_ns,yields\n"
          "3,flux_kernel,4,10000,2500.000,2000,3000,2\n");
}

TEST_CASE("profile CSV: empty run yields header only") {
    std::ostringstream out;
    CHECK(write_profile_csv({}, out) == 0);
    CHECK(out.str() == "rank,name,calls,total_ns,mean_ns,min_ns,max_ns,yields\n");
}

TEST_CASE("profile CSV: random round trip reproduces every field") {
    RunProfile run;
    for (std::uint64_t seed = 20; seed <= 23; ++seed) {
        Snapshot s = random_snapshot(seed);
        s.rank = static_cast<std::int32_t>(seed);  // distinct ranks
        run.push_back(std::move(s));
    }
    std::ostringstream out;
    write_profile_csv(run, out);
    std::istringstream in(out.str());
    const RunProfile parsed = read_profile_csv(in);

    REQUIRE(parsed.size() == run.size());
    for (std::size_t i = 0; i < run.size(); ++i) {
        CHECK(parsed[i].rank == run[i].rank);
        CHECK(parsed[i].profile == run[i].profile);
    }
}

TEST_CASE("profile CSV: malformed input is rejected with the line number") {
    auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return read_profile_csv(in);
    };
    CHECK_THROWS_WITH_AS(parse(""), "profile CSV: empty input", std::runtime_error);
    CHECK_THROWS_AS(parse("rank,name\n"), std::runtime_error);
    const std::string header = "rank,name,calls,total_ns,mean_ns,min_ns,max_ns,yields\n";
    CHECK_THROWS_WITH_AS(parse(header + "0,flux,1,100,100.0,100\n"),
                         "profile CSV line 2: expected 8 fields, got 6", std::runtime_error);
    CHECK_THROWS_AS(parse(header + "0,flux,x,100,100.0,100,100,0\n"), std::runtime_error);
    CHECK_THROWS_AS(parse(header + "0,flux,1,100,100.0,100,100,0\n0,flux,1,100,100.0,100,100,0\n"),
                    std::runtime_error);
}

TEST_CASE("scatter CSV: pinned format and counts") {
    Snapshot s;
    s.rank = 1;
    s.scatter.push_back({"flux", 123, 456});
    s.scatter.push_back({"p2p", 999, 1});
    std::ostringstream out;
    CHECK(write_scatter_csv({s}, out) == 2);
    CHECK(out.str() ==
          "rank,name,start_ns,duration_ns\n"
          "1,flux,123,456\n"
          "1,p2p,999,1\n");
}

TEST_CASE("DOT: single root task") {
    Snapshot s;
    s.profile["root"] = {1, 500, 500, 500, 0};
    std::ostringstream out;
    const GraphCounts counts = write_taskgraph_dot(s, out);
    CHECK(counts == GraphCounts{1, 0});
    CHECK(out.str().find("digraph taskgraph {") == 0);
    CHECK(out.str().find("\"root\" [label=\"root\\ncalls=1 mean=0.500us\"]") != std::string::npos);
}

TEST_CASE("DOT: step spawning flux and reconstruct three times each") {
    Snapshot s;
    s.profile["step"] = {1, 9000, 9000, 9000, 0};
    s.profile["flux"] = {3, 6000, 2000, 2000, 0};
    s.profile["reconstruct"] = {3, 3000, 1000, 1000, 0};
    s.edges[{"step", "flux"}] = 3;
    s.edges[{"step", "reconstruct"}] = 3;
    std::ostringstream out;
    const GraphCounts counts = write_taskgraph_dot(s, out);
    CHECK(counts == GraphCounts{3, 2});

    const std::string text = out.str();
    CHECK(text.find("\"step\" -> \"flux\" [label=\"3\"];") != std::string::npos);
    CHECK(text.find("\"step\" -> \"reconstruct\" [label=\"3\"];") != std::string::npos);
    // Node lines are lexicographic: flux, reconstruct, step.
    CHECK(text.find("\"flux\" [") < text.find("\"reconstruct\" ["));
    CHECK(text.find("\"reconstruct\" [") < text.find("\"step\" ["));
}

TEST_CASE("DOT: a test parser agrees with the reported counts") {
    const Snapshot s = random_snapshot(42);
    std::ostringstream out;
    const GraphCounts counts = write_taskgraph_dot(s, out);

    std::istringstream in(out.str());
    std::string line;
    std::uint64_t nodes = 0;
    std::uint64_t edges = 0;
    REQUIRE(std::getline(in, line));
    REQUIRE(line == "digraph taskgraph {");
    while (std::getline(in, line) && line != "}") {
        if (line.find(" -> ") != std::string::npos)
            ++edges;
        else if (line.find("[label=") != std::string::npos)
            ++nodes;
    }
    CHECK(nodes == counts.nodes);
    CHECK(edges == counts.edges);
}

TEST_CASE("DOT: byte-identical across repeated writes") {
    const Snapshot s = random_snapshot(77);
    std::ostringstream a;
    std::ostringstream b;
    write_taskgraph_dot(s, a);
    write_taskgraph_dot(s, b);
    CHECK(a.str() == b.str());
    CHECK(!a.str().empty());
}

TEST_CASE("diff: the 4.6x discrepancy is first and flagged at threshold 2") {
    Snapshot a;
    a.profile["async"] = {10, 460000, 46000, 46000, 0};   // mean 46 us
    a.profile["stencil"] = {5, 50000, 10000, 10000, 0};   // mean 10 us
    Snapshot b;
    b.profile["async"] = {10, 100000, 10000, 10000, 0};   // mean 10 us
    b.profile["stencil"] = {5, 55000, 11000, 11000, 0};   // mean 11 us

    const auto rows = diff_profiles(a, b, 2.0);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].name == "async");
    CHECK(rows[0].mean_ratio == doctest::Approx(4.6));
    CHECK(rows[0].flagged);
    CHECK(!rows[0].one_sided);
    CHECK(rows[1].name == "stencil");
    CHECK(!rows[1].flagged);
}

TEST_CASE("diff: identical profiles produce unit ratios and no flags") {
    const Snapshot s = random_snapshot(5);
    const auto rows = diff_profiles(s, s, 1.5);
    CHECK(rows.size() == s.profile.size());
    for (const auto& row : rows) {
        CHECK(row.mean_ratio == 1.0);
        CHECK(!row.flagged);
        CHECK(!row.one_sided);
    }
}

TEST_CASE("diff: ordered by descending |log ratio|, one-sided rows last") {
    Snapshot a;
    a.profile["tenth"] = {1, 100, 100, 100, 0};
    a.profile["double"] = {1, 2000, 2000, 2000, 0};
    a.profile["only_a"] = {1, 5, 5, 5, 0};
    Snapshot b;
    b.profile["tenth"] = {1, 1000, 1000, 1000, 0};
    b.profile["double"] = {1, 1000, 1000, 1000, 0};
    b.profile["only_b"] = {2, 50, 25, 25, 0};

    const auto rows = diff_profiles(a, b, 3.0);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].name == "tenth");   // |log 0.1| = 2.30
    CHECK(rows[1].name == "double");  // |log 2|   = 0.69
    CHECK(rows[0].flagged);
    CHECK(!rows[1].flagged);
    CHECK(rows[2].name == "only_a");
    CHECK(rows[3].name == "only_b");
    CHECK(rows[2].one_sided);
    CHECK(rows[3].one_sided);
    CHECK(rows[2].mean_ratio == 0.0);
    CHECK(rows[3].calls_b == 2);
}

TEST_CASE("diff: threshold must exceed 1") {
    CHECK_THROWS_AS(diff_profiles({}, {}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(diff_profiles({}, {}, 0.5), std::invalid_argument);
}

TEST_CASE("codec: empty snapshot round-trips") {
    const Snapshot s;
    const auto bytes = encode_snapshot(s);
    CHECK(decode_snapshot(bytes) == s);
}

TEST_CASE("codec: randomized snapshots round-trip bit-exactly") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Snapshot s = random_snapshot(seed);
        std::size_t consumed = 0;
        const auto bytes = encode_snapshot(s);
        const Snapshot back = decode_snapshot(bytes.data(), bytes.size(), &consumed);
        CHECK(back == s);
        CHECK(consumed == bytes.size());
    }
}

TEST_CASE("codec: every truncation errors instead of crashing") {
    const auto bytes = encode_snapshot(random_snapshot(3));
    for (std::size_t len = 0; len < bytes.size(); ++len) {
        std::vector<std::uint8_t> prefix(bytes.begin(), bytes.begin() + len);
        try {
            decode_snapshot(prefix);
            FAIL("prefix of length ", len, " decoded");
        } catch (const CodecError& e) {
            CHECK(e.offset() <= len);
        }
    }
}

TEST_CASE("codec: bad magic and bad version carry offsets") {
    auto bytes = encode_snapshot(Snapshot{});
    auto corrupted = bytes;
    corrupted[0] = 'X';
    try {
        decode_snapshot(corrupted);
        FAIL("bad magic accepted");
    } catch (const CodecError& e) {
        CHECK(e.offset() == 0);
    }
    corrupted = bytes;
    corrupted[4] = 9;
    try {
        decode_snapshot(corrupted);
        FAIL("bad version accepted");
    } catch (const CodecError& e) {
        CHECK(e.offset() == 4);
    }
}

TEST_CASE("codec: trailing bytes are rejected by the strict overload") {
    auto bytes = encode_snapshot(Snapshot{});
    const std::size_t clean = bytes.size();
    bytes.push_back(0);
    try {
        decode_snapshot(bytes);
        FAIL("trailing byte accepted");
    } catch (const CodecError& e) {
        CHECK(e.offset() == clean);
    }
}

TEST_CASE("codec: snapshot files concatenate and read back in order") {
    RunProfile run;
    for (std::uint64_t seed = 30; seed < 33; ++seed) run.push_back(random_snapshot(seed));
    const std::string path = "test_codec_roundtrip.bin";
    write_snapshot_file(run, path);
    CHECK(read_snapshot_file(path) == run);
    std::remove(path.c_str());
}

}  // TEST_SUITE

// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/export.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <tuple>

#include <json.hpp>

namespace taskscope {

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    return in;
}

// Fixed-point helper so CSV/DOT floats are locale-proof and byte-stable.
std::string fixed3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

constexpr std::int64_t kDeviceLaneBase = 10000;
constexpr std::int64_t kDeviceLaneStride = 1000;
constexpr std::int64_t kDeviceHouseLane = 999;  // alloc/free: no stream

std::int64_t device_lane(const ActivityRecord& rec) {
    const std::int64_t sub = rec.stream_id >= 0 ? rec.stream_id : kDeviceHouseLane;
    return kDeviceLaneBase + static_cast<std::int64_t>(rec.device_id) * kDeviceLaneStride + sub;
}

struct CompleteEvent {
    std::int32_t pid = 0;
    std::int64_t tid = 0;
    std::uint64_t start_ns = 0;
    std::uint64_t dur_ns = 0;
    std::string name;
    std::string cat;
    Guid guid = 0;
    std::optional<Guid> parent_guid;
    std::optional<std::uint64_t> bytes;

    auto key() const { return std::tie(pid, tid, start_ns, dur_ns, name, guid); }
};

struct CounterEvent {
    std::int32_t pid = 0;
    std::string name;
    std::uint64_t ts_ns = 0;
    double value = 0.0;

    auto key() const { return std::tie(pid, name, ts_ns, value); }
};

double to_us(std::uint64_t ns) { return static_cast<double>(ns) / 1000.0; }

}  // namespace

std::uint64_t write_trace_events(const RunProfile& run, std::ostream& out) {
    std::vector<CompleteEvent> xs;
    std::vector<CounterEvent> cs;
    for (const Snapshot& s : run) {
        for (const Segment& seg : s.segments) {
            xs.push_back({s.rank, seg.worker, seg.start_ns, seg.end_ns - seg.start_ns, seg.name,
                          "task", seg.guid, seg.parent_guid, std::nullopt});
        }
        for (const ActivityRecord& rec : s.activity) {
            xs.push_back({s.rank, device_lane(rec), rec.start_ns, rec.end_ns - rec.start_ns,
                          rec.name, to_string(rec.kind), rec.correlation_guid, std::nullopt,
                          rec.bytes});
        }
        for (const auto& [name, series] : s.counters) {
            for (const CounterSample& sample : series.samples) {
                if (!std::isfinite(sample.value)) continue;
                cs.push_back({s.rank, name, sample.ts_ns, sample.value});
            }
        }
    }
    std::sort(xs.begin(), xs.end(),
              [](const CompleteEvent& a, const CompleteEvent& b) { return a.key() < b.key(); });
    std::sort(cs.begin(), cs.end(),
              [](const CounterEvent& a, const CounterEvent& b) { return a.key() < b.key(); });

    // Counter events carry tid 0, which worker 0's lane also uses; a single
    // interleaved emission keeps every (pid, tid) lane ts-sorted in file order.
    struct EmitRef {
        std::int32_t pid = 0;
        std::int64_t tid = 0;
        std::uint64_t ts_ns = 0;
        int kind = 0;  // 0 = complete, 1 = counter
        std::size_t index = 0;

        auto key() const { return std::tie(pid, tid, ts_ns, kind, index); }
    };
    std::vector<EmitRef> order;
    order.reserve(xs.size() + cs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        order.push_back({xs[i].pid, xs[i].tid, xs[i].start_ns, 0, i});
    for (std::size_t i = 0; i < cs.size(); ++i) order.push_back({cs[i].pid, 0, cs[i].ts_ns, 1, i});
    std::sort(order.begin(), order.end(),
              [](const EmitRef& a, const EmitRef& b) { return a.key() < b.key(); });

    out << "[";
    std::uint64_t count = 0;
    auto emit = [&](const nlohmann::ordered_json& event) {
        out << (count == 0 ? "\n" : ",\n") << event.dump();
        ++count;
    };
    for (const EmitRef& ref : order) {
        if (ref.kind == 0) {
            const CompleteEvent& e = xs[ref.index];
            nlohmann::ordered_json event{{"name", e.name}, {"cat", e.cat},        {"ph", "X"},
                                         {"ts", to_us(e.start_ns)},              {"dur", to_us(e.dur_ns)},
                                         {"pid", e.pid},  {"tid", e.tid}};
            nlohmann::ordered_json args{{"guid", e.guid}};
            if (e.parent_guid) args["parent_guid"] = *e.parent_guid;
            if (e.bytes) args["bytes"] = *e.bytes;
            event["args"] = std::move(args);
            emit(event);
        } else {
            const CounterEvent& e = cs[ref.index];
            emit(nlohmann::ordered_json{{"name", e.name},
                                        {"cat", "counter"},
                                        {"ph", "C"},
                                        {"ts", to_us(e.ts_ns)},
                                        {"pid", e.pid},
                                        {"tid", 0},
                                        {"args", {{"value", e.value}}}});
        }
    }
    out << "\n]\n";
    if (!out) throw std::runtime_error("trace write failed");
    return count;
}

std::uint64_t write_trace_events(const RunProfile& run, const std::string& path) {
    std::ofstream out = open_out(path);
    return write_trace_events(run, out);
}

namespace {

const char kProfileHeader[] = "rank,name,calls,total_ns,mean_ns,min_ns,max_ns,yields";

}  // namespace

std::uint64_t write_profile_csv(const RunProfile& run, std::ostream& out) {
    out << kProfileHeader << "\n";
    std::uint64_t rows = 0;
    for (const Snapshot& s : run) {
        for (const auto& [name, e] : s.profile) {
            out << s.rank << ',' << name << ',' << e.calls << ',' << e.total_active_ns << ','
                << fixed3(e.mean_ns()) << ',' << e.min_ns << ',' << e.max_ns << ','
                << e.total_yields << "\n";
            ++rows;
        }
    }
    if (!out) throw std::runtime_error("profile CSV write failed");
    return rows;
}

std::uint64_t write_profile_csv(const RunProfile& run, const std::string& path) {
    std::ofstream out = open_out(path);
    return write_profile_csv(run, out);
}

std::uint64_t write_scatter_csv(const RunProfile& run, std::ostream& out) {
    out << "rank,name,start_ns,duration_ns\n";
    std::uint64_t rows = 0;
    for (const Snapshot& s : run) {
        for (const ScatterSample& sample : s.scatter) {
            out << s.rank << ',' << sample.name << ',' << sample.start_ns << ','
                << sample.duration_ns << "\n";
            ++rows;
        }
    }
    if (!out) throw std::runtime_error("scatter CSV write failed");
    return rows;
}

std::uint64_t write_scatter_csv(const RunProfile& run, const std::string& path) {
    std::ofstream out = open_out(path);
    return write_scatter_csv(run, out);
}

namespace {

[[noreturn]] void csv_error(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("profile CSV line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t begin = 0;
    while (true) {
        const std::size_t comma = line.find(',', begin);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(begin));
            return fields;
        }
        fields.push_back(line.substr(begin, comma - begin));
        begin = comma + 1;
    }
}

template <typename T>
T parse_number(const std::string& field, std::size_t line_no, const char* column) {
    T value{};
    const char* first = field.data();
    const char* last = first + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last)
        csv_error(line_no, std::string("bad ") + column + " value '" + field + "'");
    return value;
}

}  // namespace

RunProfile read_profile_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("profile CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kProfileHeader)
        throw std::runtime_error("profile CSV: unexpected header '" + line + "'");

    std::map<std::int32_t, Snapshot> by_rank;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        if (f.size() != 8) csv_error(line_no, "expected 8 fields, got " + std::to_string(f.size()));
        const auto rank = parse_number<std::int32_t>(f[0], line_no, "rank");
        FlatProfileEntry entry;
        entry.calls = parse_number<std::uint64_t>(f[2], line_no, "calls");
        entry.total_active_ns = parse_number<std::uint64_t>(f[3], line_no, "total_ns");
        parse_number<double>(f[4], line_no, "mean_ns");  // derived; validated only
        entry.min_ns = parse_number<std::uint64_t>(f[5], line_no, "min_ns");
        entry.max_ns = parse_number<std::uint64_t>(f[6], line_no, "max_ns");
        entry.total_yields = parse_number<std::uint64_t>(f[7], line_no, "yields");
        Snapshot& s = by_rank[rank];
        s.rank = rank;
        if (!s.profile.emplace(f[1], entry).second)
            csv_error(line_no, "duplicate task name '" + f[1] + "' for rank " + f[0]);
    }
    RunProfile run;
    run.reserve(by_rank.size());
    for (auto& [rank, s] : by_rank) run.push_back(std::move(s));
    return run;
}

RunProfile read_profile_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    return read_profile_csv(in);
}

namespace {

std::string dot_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\' || c == '"') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

}  // namespace

GraphCounts write_taskgraph_dot(const Snapshot& snapshot, std::ostream& out) {
    std::set<std::string> names;
    for (const auto& [name, entry] : snapshot.profile) names.insert(name);
    for (const auto& [edge, count] : snapshot.edges) {
        names.insert(edge.first);
        names.insert(edge.second);
    }

    out << "digraph taskgraph {\n";
    out << "  rankdir=LR;\n";
    out << "  node [shape=box];\n";
    GraphCounts counts;
    for (const std::string& name : names) {
        std::uint64_t calls = 0;
        double mean_us = 0.0;
        if (auto it = snapshot.profile.find(name); it != snapshot.profile.end()) {
            calls = it->second.calls;
            mean_us = it->second.mean_ns() / 1000.0;
        }
        out << "  \"" << dot_escape(name) << "\" [label=\"" << dot_escape(name)
            << "\\ncalls=" << calls << " mean=" << fixed3(mean_us) << "us\"];\n";
        ++counts.nodes;
    }
    for (const auto& [edge, count] : snapshot.edges) {
        out << "  \"" << dot_escape(edge.first) << "\" -> \"" << dot_escape(edge.second)
            << "\" [label=\"" << count << "\"];\n";
        ++counts.edges;
    }
    out << "}\n";
    if (!out) throw std::runtime_error("DOT write failed");
    return counts;
}

GraphCounts write_taskgraph_dot(const Snapshot& snapshot, const std::string& path) {
    std::ofstream out = open_out(path);
    return write_taskgraph_dot(snapshot, out);
}

std::vector<ProfileDiffRow> diff_profiles(const Snapshot& a, const Snapshot& b,
                                          double threshold) {
    if (!(threshold > 1.0)) throw std::invalid_argument("diff threshold must be > 1");

    std::vector<ProfileDiffRow> both;
    std::vector<ProfileDiffRow> one_sided;
    std::set<std::string> names;
    for (const auto& [name, entry] : a.profile) names.insert(name);
    for (const auto& [name, entry] : b.profile) names.insert(name);

    for (const std::string& name : names) {
        const auto ia = a.profile.find(name);
        const auto ib = b.profile.find(name);
        ProfileDiffRow row;
        row.name = name;
        if (ia != a.profile.end()) {
            row.calls_a = ia->second.calls;
            row.mean_a_ns = ia->second.mean_ns();
        }
        if (ib != b.profile.end()) {
            row.calls_b = ib->second.calls;
            row.mean_b_ns = ib->second.mean_ns();
        }
        if (ia == a.profile.end() || ib == b.profile.end()) {
            row.one_sided = true;
            one_sided.push_back(std::move(row));
            continue;
        }
        if (row.mean_a_ns == 0.0 && row.mean_b_ns == 0.0) {
            row.mean_ratio = 1.0;
        } else if (row.mean_b_ns == 0.0) {
            row.mean_ratio = std::numeric_limits<double>::infinity();
        } else {
            row.mean_ratio = row.mean_a_ns / row.mean_b_ns;
        }
        row.flagged = row.mean_ratio > threshold || row.mean_ratio < 1.0 / threshold;
        both.push_back(std::move(row));
    }

    std::sort(both.begin(), both.end(), [](const ProfileDiffRow& x, const ProfileDiffRow& y) {
        const double lx = std::fabs(std::log(x.mean_ratio));
        const double ly = std::fabs(std::log(y.mean_ratio));
        if (lx != ly) return lx > ly;
        return x.name < y.name;
    });
    both.insert(both.end(), std::make_move_iterator(one_sided.begin()),
                std::make_move_iterator(one_sided.end()));
    return both;
}

}  // namespace taskscope

// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0
//
// taskscope: run the benchmark workload, quantify measurement overhead, and
// convert/compare the artifacts it produces.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "taskscope/distrib.hpp"
#include "taskscope/export.hpp"
#include "taskscope/harness.hpp"
#include "taskscope/workload.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace taskscope;

namespace {

// Bad input of any kind: exit code 1. Everything else that throws during a
// run: exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

WorkloadConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    try {
        return read_workload_config(path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

std::string g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fixed2(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

Snapshot fold_run(const RunProfile& run) {
    Snapshot merged;
    for (const Snapshot& s : run) merged = merge_profiles(merged, s);
    return merged;
}

UsageError input_error(const std::string& path, const std::exception& e) {
    const std::string what = e.what();
    if (what.find(path) != std::string::npos) return UsageError(what);
    return UsageError(path + ": " + what);
}

RunProfile load_profile_csv(const std::string& path) {
    try {
        return read_profile_csv(path);
    } catch (const std::exception& e) {
        throw input_error(path, e);
    }
}

RunProfile load_snapshot_file(const std::string& path) {
    try {
        return read_snapshot_file(path);
    } catch (const std::exception& e) {
        throw input_error(path, e);
    }
}

struct BenchArgs {
    std::string config;
    int localities = 1;
    std::string transport = "inproc";
    std::string profile = "on";
    int workers = 1;
    std::string out;
    double inject_seconds = -1.0;
};

int run_bench(const BenchArgs& args) {
    const WorkloadConfig cfg = load_config(args.config);
    if (args.localities < 1) throw UsageError("--localities must be positive");
    if (args.workers < 1) throw UsageError("--workers must be positive");

    LocalityConfig lc;
    lc.profiler.enabled = args.profile == "on";
    lc.device.stream_count = cfg.stream_count;
    lc.scheduler.worker_count = static_cast<unsigned>(args.workers);
    lc.scheduler.seed = cfg.step.seed;

    const auto size = static_cast<LocalityId>(args.localities);
    auto world = args.transport == "tcp" ? World::create_tcp(size, lc)
                                         : World::create_inproc(size, lc);
    Mesh mesh = build_mesh(cfg.levels, args.localities, cfg.step.seed, cfg.cells_per_edge);
    WorkloadSession session(mesh, *world, cfg.step);
    if (lc.profiler.enabled)
        for (LocalityId r = 0; r < world->size(); ++r)
            world->locality(r).profiler().start_monitor();
    const ScalingPoint point = session.run_benchmark();
    for (LocalityId r = 0; r < world->size(); ++r) {
        world->locality(r).profiler().stop_monitor();
        world->locality(r).device().flush_activity();
    }

    RunProfile run;
    for (LocalityId r = 0; r < world->size(); ++r)
        run.push_back(world->locality(r).local_snapshot());

    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    write_snapshot_file(run, (out_dir / "snapshot.bin").string());
    write_profile_csv(run, (out_dir / "profile.csv").string());
    write_scatter_csv(run, (out_dir / "scatter.csv").string());
    write_trace_events(run, (out_dir / "trace.json").string());
    write_taskgraph_dot(fold_run(run), (out_dir / "taskgraph.dot").string());

    const double total_cells = static_cast<double>(mesh.total_cells());
    const double steps = static_cast<double>(cfg.step.num_steps);
    const double total_time_s =
        args.inject_seconds > 0.0 ? args.inject_seconds : point.total_time_s;
    const double cells_per_second = total_cells * steps / total_time_s;

    json manifest;
    manifest["workload"] = {
        {"levels", cfg.levels},
        {"cells_per_edge", cfg.cells_per_edge},
        {"streams", cfg.stream_count},
        {"steps", cfg.step.num_steps},
        {"hydro_iterations", cfg.step.hydro_iterations_per_step},
        {"gravity_iterations", cfg.step.gravity_iterations_per_step},
        {"comm_mode", to_string(cfg.step.comm_mode)},
        {"seed", cfg.step.seed},
        {"kernel_min_ns", cfg.step.kernel_min_ns},
        {"kernel_max_ns", cfg.step.kernel_max_ns},
    };
    manifest["run"] = {
        {"localities", args.localities},
        {"transport", args.transport},
        {"profile", args.profile},
        {"workers_per_locality", args.workers},
        {"sub_grids", mesh.grids.size()},
        {"total_cells", mesh.total_cells()},
        {"total_time_s", total_time_s},
        {"cells_per_second", cells_per_second},
    };
    std::ofstream mf(out_dir / "manifest.json");
    mf << manifest.dump(2) << "\n";
    if (!mf) throw std::runtime_error("cannot write " + (out_dir / "manifest.json").string());

    std::cout << "bench: " << args.localities << " localities, " << mesh.grids.size()
              << " sub-grids, " << cfg.step.num_steps << " steps, " << fixed2(total_time_s)
              << " s, " << fixed2(cells_per_second) << " cells/s\n"
              << "artifacts in " << out_dir.string() << "\n";
    return 0;
}

struct OverheadArgs {
    std::string config;
    int localities = 1;
    int repetitions = 3;
    std::vector<double> inject_times;
};

int run_overhead(const OverheadArgs& args) {
    const WorkloadConfig cfg = load_config(args.config);
    if (args.localities < 1) throw UsageError("--localities must be positive");
    if (args.repetitions < 1) throw UsageError("--repetitions must be positive");

    OverheadReport report;
    if (!args.inject_times.empty()) {
        if (args.inject_times.size() != 2)
            throw UsageError("--inject-times wants exactly: comp_apex_s,comp_no_apex_s");
        if (!(args.inject_times[0] > 0.0) || !(args.inject_times[1] > 0.0))
            throw UsageError("--inject-times values must be positive");
        report.n = args.localities;
        report.comp_apex_s = args.inject_times[0];
        report.comp_no_apex_s = args.inject_times[1];
        report.o_percent = compute_overhead(report.n, report.comp_apex_s, report.comp_no_apex_s);
        report.comp_absent_s = report.comp_no_apex_s;
        report.intrusion_percent = 0.0;
    } else {
        report = run_overhead_experiment(cfg, args.localities, args.repetitions);
    }

    std::cout << "n,comp_apex_s,comp_no_apex_s,o_percent,comp_absent_s,intrusion_percent\n"
              << report.n << ',' << g17(report.comp_apex_s) << ','
              << g17(report.comp_no_apex_s) << ',' << g17(report.o_percent) << ','
              << g17(report.comp_absent_s) << ',' << g17(report.intrusion_percent) << "\n"
              << "o(" << report.n << ") = " << fixed2(report.o_percent) << "%\n";
    return 0;
}

struct SweepArgs {
    std::string config;
    std::vector<int> counts;
    int repetitions = 1;
    std::string out;
    std::vector<double> inject_times;
};

int run_sweep(const SweepArgs& args) {
    const WorkloadConfig cfg = load_config(args.config);
    if (args.repetitions < 1) throw UsageError("--repetitions must be positive");

    std::vector<SweepRow> rows;
    try {
        if (!args.inject_times.empty()) {
            if (args.inject_times.size() != 2 * args.counts.size())
                throw UsageError(
                    "--inject-times wants time_with_s,time_without_s per locality count");
            std::vector<double> with_s;
            std::vector<double> without_s;
            for (std::size_t i = 0; i < args.counts.size(); ++i) {
                with_s.push_back(args.inject_times[2 * i]);
                without_s.push_back(args.inject_times[2 * i + 1]);
            }
            rows = sweep_rows_from_times(cfg, args.counts, with_s, without_s);
        } else {
            rows = run_scaling_sweep(cfg, args.counts, args.repetitions);
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    if (args.out.empty()) {
        write_sweep_csv(std::cout, rows);
    } else {
        std::ofstream out(args.out);
        if (!out) throw std::runtime_error("cannot write " + args.out);
        write_sweep_csv(out, rows);
        std::cout << "sweep: " << rows.size() << " rows in " << args.out << "\n";
    }
    return 0;
}

struct ExportArgs {
    std::string in;
    std::string out;
    std::vector<std::string> formats{"trace", "profile", "scatter", "dot"};
};

int run_export(const ExportArgs& args) {
    const RunProfile run = load_snapshot_file(args.in);
    const fs::path out_dir(args.out);
    fs::create_directories(out_dir);
    for (const std::string& format : args.formats) {
        if (format == "trace")
            write_trace_events(run, (out_dir / "trace.json").string());
        else if (format == "profile")
            write_profile_csv(run, (out_dir / "profile.csv").string());
        else if (format == "scatter")
            write_scatter_csv(run, (out_dir / "scatter.csv").string());
        else if (format == "dot")
            write_taskgraph_dot(fold_run(run), (out_dir / "taskgraph.dot").string());
        else
            throw UsageError("unknown format '" + format +
                             "' (expected trace, profile, scatter or dot)");
    }
    std::cout << "exported " << run.size() << " snapshot(s) to " << out_dir.string() << "\n";
    return 0;
}

struct DiffArgs {
    std::string a;
    std::string b;
    double threshold = 2.0;
};

int run_diff(const DiffArgs& args) {
    if (!(args.threshold > 1.0)) throw UsageError("--threshold must be greater than 1");
    const Snapshot a = fold_run(load_profile_csv(args.a));
    const Snapshot b = fold_run(load_profile_csv(args.b));
    const std::vector<ProfileDiffRow> rows = diff_profiles(a, b, args.threshold);

    std::printf("%-32s %10s %10s %14s %14s %8s\n", "name", "calls_a", "calls_b", "mean_a_us",
                "mean_b_us", "ratio");
    std::size_t flagged = 0;
    for (const ProfileDiffRow& row : rows) {
        const bool has_a = row.calls_a > 0;
        const bool has_b = row.calls_b > 0;
        std::printf("%-32s ", row.name.c_str());
        if (has_a)
            std::printf("%10llu ", static_cast<unsigned long long>(row.calls_a));
        else
            std::printf("%10s ", "-");
        if (has_b)
            std::printf("%10llu ", static_cast<unsigned long long>(row.calls_b));
        else
            std::printf("%10s ", "-");
        if (has_a)
            std::printf("%14.3f ", row.mean_a_ns / 1000.0);
        else
            std::printf("%14s ", "-");
        if (has_b)
            std::printf("%14.3f ", row.mean_b_ns / 1000.0);
        else
            std::printf("%14s ", "-");
        if (row.one_sided)
            std::printf("%8s", "-");
        else
            std::printf("%8.3f", row.mean_ratio);
        if (row.flagged) {
            std::printf(" *");
            ++flagged;
        }
        std::printf("\n");
    }
    std::printf("%zu names, %zu flagged (threshold %s)\n", rows.size(), flagged,
                fixed2(args.threshold).c_str());
    return 0;
}

struct AggregateArgs {
    std::vector<std::string> inputs;
    std::string out;
};

int run_aggregate(const AggregateArgs& args) {
    RunProfile all;
    for (const std::string& path : args.inputs) {
        RunProfile run = load_snapshot_file(path);
        for (Snapshot& s : run) all.push_back(std::move(s));
    }
    const Snapshot merged = fold_run(all);
    write_snapshot_file({merged}, args.out);
    std::cout << "aggregated " << all.size() << " snapshot(s) from " << args.inputs.size()
              << " file(s) into " << args.out << " (" << merged.profile.size()
              << " task names)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"task-aware performance measurement toolkit"};
    app.require_subcommand(1);

    BenchArgs bench;
    CLI::App* bench_cmd = app.add_subcommand("bench", "run the workload and write artifacts");
    bench_cmd->add_option("--config", bench.config, "workload config file");
    bench_cmd->add_option("--localities", bench.localities, "locality count")
        ->capture_default_str();
    bench_cmd->add_option("--transport", bench.transport, "parcel transport")
        ->check(CLI::IsMember({"inproc", "tcp"}))
        ->capture_default_str();
    bench_cmd->add_option("--profile", bench.profile, "profiling on or off")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    bench_cmd->add_option("--workers", bench.workers, "worker threads per locality")
        ->capture_default_str();
    bench_cmd->add_option("--out", bench.out, "artifact directory")->required();
    bench_cmd->add_option("--inject-seconds", bench.inject_seconds)->group("");

    OverheadArgs overhead;
    CLI::App* overhead_cmd =
        app.add_subcommand("overhead", "measure profiling overhead per Eq.-style ratio");
    overhead_cmd->add_option("--config", overhead.config, "workload config file");
    overhead_cmd->add_option("--localities", overhead.localities, "locality count")
        ->capture_default_str();
    overhead_cmd->add_option("--repetitions", overhead.repetitions, "runs per arm, fastest wins")
        ->capture_default_str();
    overhead_cmd->add_option("--inject-times", overhead.inject_times)
        ->delimiter(',')
        ->group("");

    SweepArgs sweep;
    CLI::App* sweep_cmd = app.add_subcommand("sweep", "scaling sweep over locality counts");
    sweep_cmd->add_option("--config", sweep.config, "workload config file");
    sweep_cmd->add_option("--counts", sweep.counts, "locality counts, ascending")
        ->delimiter(',')
        ->required();
    sweep_cmd->add_option("--repetitions", sweep.repetitions, "runs per arm, fastest wins")
        ->capture_default_str();
    sweep_cmd->add_option("--out", sweep.out, "CSV output file (default: stdout)");
    sweep_cmd->add_option("--inject-times", sweep.inject_times)->delimiter(',')->group("");

    ExportArgs exp;
    CLI::App* export_cmd =
        app.add_subcommand("export", "convert a snapshot file into viewer formats");
    export_cmd->add_option("--in", exp.in, "snapshot file")->required();
    export_cmd->add_option("--out", exp.out, "artifact directory")->required();
    export_cmd->add_option("--formats", exp.formats, "trace, profile, scatter, dot")
        ->delimiter(',')
        ->capture_default_str();

    DiffArgs diff;
    CLI::App* diff_cmd = app.add_subcommand("diff", "compare two profile CSVs");
    diff_cmd->add_option("--a", diff.a, "left profile.csv")->required();
    diff_cmd->add_option("--b", diff.b, "right profile.csv")->required();
    diff_cmd->add_option("--threshold", diff.threshold, "flag ratios outside [1/t, t]")
        ->capture_default_str();

    AggregateArgs aggregate;
    CLI::App* aggregate_cmd =
        app.add_subcommand("aggregate", "merge snapshot files into one profile");
    aggregate_cmd->add_option("inputs", aggregate.inputs, "snapshot files")->required();
    aggregate_cmd->add_option("--out", aggregate.out, "merged snapshot file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (bench_cmd->parsed()) return run_bench(bench);
        if (overhead_cmd->parsed()) return run_overhead(overhead);
        if (sweep_cmd->parsed()) return run_sweep(sweep);
        if (export_cmd->parsed()) return run_export(exp);
        if (diff_cmd->parsed()) return run_diff(diff);
        if (aggregate_cmd->parsed()) return run_aggregate(aggregate);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

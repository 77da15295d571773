// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/harness.hpp"

#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "taskscope/distrib.hpp"

namespace taskscope {

double compute_overhead(int n, double comp_apex_s, double comp_no_apex_s) {
    (void)n;
    if (!(comp_no_apex_s > 0.0))
        throw std::invalid_argument("overhead baseline must be positive");
    return (comp_apex_s / comp_no_apex_s) * 100.0 - 100.0;
}

const char* to_string(ProfilingArm arm) {
    switch (arm) {
        case ProfilingArm::full: return "full";
        case ProfilingArm::cpu_timers_only: return "cpu_timers_only";
        case ProfilingArm::disabled: return "disabled";
        case ProfilingArm::absent: return "absent";
    }
    throw std::invalid_argument("unknown profiling arm");
}

namespace {

LocalityConfig arm_config(const WorkloadConfig& config, ProfilingArm arm) {
    LocalityConfig cfg;
    cfg.device.stream_count = config.stream_count;
    cfg.scheduler.seed = config.step.seed;
    switch (arm) {
        case ProfilingArm::full:
            break;
        case ProfilingArm::cpu_timers_only:
            cfg.profiler.capture.device_activity = false;
            break;
        case ProfilingArm::disabled:
            cfg.profiler.enabled = false;
            break;
        case ProfilingArm::absent:
            cfg.profiler.enabled = false;
            cfg.profiler.attach_hooks = false;
            break;
    }
    return cfg;
}

std::map<std::string, std::uint64_t> world_spawn_counts(World& world) {
    std::map<std::string, std::uint64_t> total;
    for (LocalityId r = 0; r < world.size(); ++r)
        for (const auto& [name, count] : world.locality(r).scheduler().spawn_counts())
            total[name] += count;
    return total;
}

// %.17g keeps every double bit-exact through a text round trip.
void put_g17(std::ostream& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

}  // namespace

ArmMeasurement measure_arm(const WorkloadConfig& config, int n, ProfilingArm arm,
                           int repetitions) {
    if (n < 1) throw std::invalid_argument("locality count must be positive");
    if (repetitions < 1) throw std::invalid_argument("repetitions must be positive");

    ArmMeasurement best;
    best.arm = arm;
    best.comp_s = std::numeric_limits<double>::infinity();
    const LocalityConfig locality_config = arm_config(config, arm);
    for (int rep = 0; rep < repetitions; ++rep) {
        Mesh mesh =
            build_mesh(config.levels, n, config.step.seed, config.cells_per_edge);
        auto world = World::create_inproc(static_cast<LocalityId>(n), locality_config);
        WorkloadSession session(mesh, *world, config.step);
        if (arm == ProfilingArm::full || arm == ProfilingArm::cpu_timers_only)
            for (LocalityId r = 0; r < world->size(); ++r)
                world->locality(r).profiler().start_monitor();
        const ScalingPoint point = session.run_benchmark();
        for (LocalityId r = 0; r < world->size(); ++r)
            world->locality(r).profiler().stop_monitor();

        auto counts = world_spawn_counts(*world);
        if (rep == 0)
            best.spawn_counts = std::move(counts);
        else if (counts != best.spawn_counts)
            throw std::runtime_error("repetitions of one arm executed different task graphs");
        best.comp_s = std::min(best.comp_s, point.total_time_s);
    }
    return best;
}

OverheadReport run_overhead_experiment(const WorkloadConfig& config, int n,
                                       int repetitions) {
    const ArmMeasurement full = measure_arm(config, n, ProfilingArm::full, repetitions);
    const ArmMeasurement disabled =
        measure_arm(config, n, ProfilingArm::disabled, repetitions);
    const ArmMeasurement absent = measure_arm(config, n, ProfilingArm::absent, repetitions);
    if (full.spawn_counts != disabled.spawn_counts ||
        disabled.spawn_counts != absent.spawn_counts)
        throw std::runtime_error("profiling arms executed different task graphs");

    OverheadReport report;
    report.n = n;
    report.comp_apex_s = full.comp_s;
    report.comp_no_apex_s = disabled.comp_s;
    report.o_percent = compute_overhead(n, full.comp_s, disabled.comp_s);
    report.comp_absent_s = absent.comp_s;
    report.intrusion_percent = compute_overhead(n, disabled.comp_s, absent.comp_s);
    return report;
}

namespace {

void validate_counts(const std::vector<int>& counts) {
    if (counts.empty()) throw std::invalid_argument("sweep needs at least one locality count");
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] < 1) throw std::invalid_argument("locality counts must be positive");
        if (i > 0 && counts[i] <= counts[i - 1])
            throw std::invalid_argument("locality counts must be strictly ascending");
    }
}

}  // namespace

std::vector<SweepRow> sweep_rows_from_times(const WorkloadConfig& config,
                                            const std::vector<int>& counts,
                                            const std::vector<double>& with_s,
                                            const std::vector<double>& without_s) {
    validate_counts(counts);
    if (with_s.size() != counts.size() || without_s.size() != counts.size())
        throw std::invalid_argument("sweep needs one time per arm per locality count");
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (!(with_s[i] > 0.0) || !(without_s[i] > 0.0))
            throw std::invalid_argument("sweep times must be positive");

    const double cells_processed =
        static_cast<double>(build_mesh(config.levels, 1, config.step.seed,
                                       config.cells_per_edge)
                                .total_cells()) *
        static_cast<double>(config.step.num_steps);

    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        SweepRow row;
        row.n = counts[i];
        row.time_with_s = with_s[i];
        row.time_without_s = without_s[i];
        row.cells_per_second_with = cells_processed / with_s[i];
        row.cells_per_second_without = cells_processed / without_s[i];
        row.o_percent = compute_overhead(row.n, with_s[i], without_s[i]);
        row.speedup_with = with_s.front() / with_s[i];
        row.speedup_without = without_s.front() / without_s[i];
        rows.push_back(row);
    }
    return rows;
}

std::vector<SweepRow> run_scaling_sweep(const WorkloadConfig& config,
                                        const std::vector<int>& counts, int repetitions) {
    validate_counts(counts);
    std::vector<double> with_s;
    std::vector<double> without_s;
    for (const int n : counts) {
        const ArmMeasurement with_arm =
            measure_arm(config, n, ProfilingArm::full, repetitions);
        const ArmMeasurement without_arm =
            measure_arm(config, n, ProfilingArm::disabled, repetitions);
        if (with_arm.spawn_counts != without_arm.spawn_counts)
            throw std::runtime_error("profiling arms executed different task graphs");
        with_s.push_back(with_arm.comp_s);
        without_s.push_back(without_arm.comp_s);
    }
    return sweep_rows_from_times(config, counts, with_s, without_s);
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "n,time_with,time_without,cells_per_second_with,cells_per_second_without,"
           "o_percent,speedup_with,speedup_without\n";
    for (const SweepRow& row : rows) {
        out << row.n;
        for (const double v : {row.time_with_s, row.time_without_s, row.cells_per_second_with,
                               row.cells_per_second_without, row.o_percent, row.speedup_with,
                               row.speedup_without}) {
            out << ',';
            put_g17(out, v);
        }
        out << "\n";
    }
}

}  // namespace taskscope

// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "taskscope/workload.hpp"

namespace taskscope {

// Relative measurement overhead in percent: how much longer the instrumented
// run took against the uninstrumented baseline at locality count `n`.
// Negative results are reported as measured. Throws std::invalid_argument on
// a non-positive baseline.
double compute_overhead(int n, double comp_apex_s, double comp_no_apex_s);

// How much of the toolkit is active during a measured run.
enum class ProfilingArm {
    full,             // hooks wired, every capture category on, OS monitor running
    cpu_timers_only,  // full minus device activity capture
    disabled,         // hooks wired but the profiler ignores every event
    absent,           // nothing wired at all: the clean baseline
};

const char* to_string(ProfilingArm arm);

struct ArmMeasurement {
    ProfilingArm arm = ProfilingArm::full;
    // Minimum computation time over the repetitions; excludes mesh and world
    // construction and any file output.
    double comp_s = 0.0;
    // Per-name task totals summed over localities, from the scheduler's
    // always-on counter. Equal across arms when the runs were identical.
    std::map<std::string, std::uint64_t> spawn_counts;
};

struct OverheadReport {
    int n = 1;
    double comp_apex_s = 0.0;     // ProfilingArm::full
    double comp_no_apex_s = 0.0;  // ProfilingArm::disabled
    double o_percent = 0.0;       // compute_overhead over the two above
    // Dormant call sites against no call sites: bounds how intrusive the
    // switched-off instrumentation is by itself.
    double comp_absent_s = 0.0;
    double intrusion_percent = 0.0;  // compute_overhead: disabled over absent
};

// Runs `config` on `n` in-process localities under the given arm
// `repetitions` times (fresh mesh and world each time) and keeps the fastest
// run. Throws std::invalid_argument on n < 1 or repetitions < 1, and
// std::runtime_error if the repetitions disagree on the task graph.
ArmMeasurement measure_arm(const WorkloadConfig& config, int n, ProfilingArm arm,
                           int repetitions = 3);

// Measures the full, disabled and absent arms sequentially (they share the
// machine) and reports the overheads. Throws std::runtime_error if any two
// arms executed different task graphs.
OverheadReport run_overhead_experiment(const WorkloadConfig& config, int n,
                                       int repetitions = 3);

struct SweepRow {
    int n = 1;
    double time_with_s = 0.0;
    double time_without_s = 0.0;
    double cells_per_second_with = 0.0;
    double cells_per_second_without = 0.0;
    double o_percent = 0.0;
    double speedup_with = 1.0;     // relative to the smallest count, same arm
    double speedup_without = 1.0;
    bool operator==(const SweepRow&) const = default;
};

// One row per locality count, profiling on and off at each. Counts must be
// non-empty, positive and strictly ascending (std::invalid_argument
// otherwise).
std::vector<SweepRow> run_scaling_sweep(const WorkloadConfig& config,
                                        const std::vector<int>& counts, int repetitions = 1);

// Pure row construction from already-measured (or injected) per-count times,
// one entry of each vector per count. Same count validation as the sweep;
// times must be positive.
std::vector<SweepRow> sweep_rows_from_times(const WorkloadConfig& config,
                                            const std::vector<int>& counts,
                                            const std::vector<double>& with_s,
                                            const std::vector<double>& without_s);

// CSV with a fixed header; doubles carry full round-trip precision so the
// derived columns stay exactly recomputable from the written text.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace taskscope

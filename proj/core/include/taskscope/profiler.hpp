// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "taskscope/hooks.hpp"
#include "taskscope/sampling.hpp"
#include "taskscope/snapshot.hpp"

namespace taskscope {

// What the profiler records. Each category can be switched off to bound its
// cost; the CUPTI-style device feed in particular varies a lot in usefulness
// per run.
struct CaptureFlags {
    bool cpu_timers = true;
    bool counters = true;
    bool device_activity = true;
    bool os_monitor = true;
    bool segments = true;
    // Raw lifecycle stream; heavy, mainly a cross-check oracle for tests.
    bool event_log = false;
};

struct ProfilerConfig {
    bool enabled = true;
    // When false the owning locality wires neither the scheduler hooks nor
    // the device sink: the baseline for measuring how intrusive the dormant
    // call sites themselves are.
    bool attach_hooks = true;
    double scatter_fraction = 0.01;
    std::uint32_t monitor_period_ms = 100;
    std::uint64_t sampling_seed = 0;
    CaptureFlags capture;
};

// Diagnostic counter names.
inline constexpr const char* kLifecycleViolations = "profiler.lifecycle_violations";
inline constexpr const char* kBadSamples = "profiler.bad_samples";
inline constexpr const char* kMonitorFailures = "profiler.monitor_failures";

// OS monitor counter names.
inline constexpr const char* kOsCpuFraction = "os.cpu_fraction";
inline constexpr const char* kOsRssBytes = "os.rss_bytes";
inline constexpr const char* kOsPeakRssBytes = "os.peak_rss_bytes";

enum class TimerState : std::uint8_t { created, running, yielded, stopped };

// Per-task-instance timer, keyed by guid so it survives cross-worker resume.
struct TaskTimer {
    TaskIdentity identity;
    std::uint64_t create_ns = 0;
    std::uint64_t first_start_ns = 0;
    std::uint64_t last_stop_ns = 0;
    std::uint64_t accumulated_active_ns = 0;
    std::uint64_t yield_count = 0;
    TimerState state = TimerState::created;
    std::uint64_t segment_begin_ns = 0;  // valid while running
    std::int32_t worker = -1;            // worker of the current/last segment
};

// APEX-style measurement core. All hooks and sample_counter are safe from
// any thread; snapshot() can run concurrently with them and returns a
// consistent copy. Out-of-order lifecycle events are dropped and counted
// under "profiler.lifecycle_violations" — never fatal to the host.
class Profiler : public LifecycleHooks {
public:
    explicit Profiler(ProfilerConfig config = {}, std::int32_t rank = 0);
    ~Profiler() override;

    Profiler(const Profiler&) = delete;
    Profiler& operator=(const Profiler&) = delete;

    void on_task_create(const TaskIdentity& identity) override;
    void on_task_start(Guid guid) override;
    void on_task_yield(Guid guid) override;
    void on_task_resume(Guid guid) override;
    void on_task_stop(Guid guid) override;

    void sample_counter(const std::string& name, double value);

    // One on-demand OS interrogation; returns what it captured. The periodic
    // monitor calls this on its own thread.
    std::vector<CounterSample> monitor_tick();
    void start_monitor();
    void stop_monitor();

    // Sink for device activity flushes.
    void deliver_activity(const ActivityRecord& record);

    // Provisional entries for still-running tasks appear only on request.
    Snapshot snapshot(bool include_running = false) const;

    struct RawEvent {
        char kind;  // 'c','s','y','r','t' + 'a' for delivered activity
        Guid guid;
        std::uint64_t ts_ns;
    };
    std::vector<RawEvent> event_log() const;

    const ProfilerConfig& config() const { return config_; }
    bool enabled() const { return config_.enabled; }
    std::int32_t rank() const { return rank_; }

private:
    void bump_diagnostic(const std::string& name);
    void sample_counter_at(const std::string& name, double value, std::uint64_t ts_ns);
    void log_event(char kind, Guid guid, std::uint64_t ts_ns);
    void monitor_main();

    ProfilerConfig config_;
    std::int32_t rank_;

    mutable std::mutex mutex_;  // timers, profile, edges, scatter, segments, activity, log
    std::map<Guid, TaskTimer> live_;
    std::map<Guid, std::string> task_names_;  // every created guid, for edges/correlation
    std::map<std::string, FlatProfileEntry> profile_;
    std::map<std::pair<std::string, std::string>, std::uint64_t> edges_;
    std::vector<ScatterSample> scatter_;
    std::vector<Segment> segments_;
    std::vector<ActivityRecord> activity_;
    std::vector<RawEvent> events_;

    mutable std::mutex counters_mutex_;
    std::map<std::string, CounterSeries> counters_;

    std::thread monitor_;
    std::mutex monitor_mutex_;  // wake signalling + tick state
    std::condition_variable monitor_cv_;
    bool monitor_stop_ = false;
    std::uint64_t monitor_prev_wall_ns_ = 0;
    double monitor_prev_cpu_s_ = 0.0;
};

}  // namespace taskscope

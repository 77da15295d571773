// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/profiler.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "taskscope/clock.hpp"
#include "taskscope/scheduler.hpp"

namespace taskscope {

namespace {

// Resident set size in bytes, or 0 on failure.
std::uint64_t read_rss_bytes() {
    std::ifstream statm("/proc/self/statm");
    std::uint64_t size_pages = 0, resident_pages = 0;
    if (!(statm >> size_pages >> resident_pages)) return 0;
    return resident_pages * static_cast<std::uint64_t>(sysconf(_SC_PAGESIZE));
}

// Peak resident set size ("high water mark") in bytes, or 0 on failure.
std::uint64_t read_peak_rss_bytes() {
    std::ifstream status("/proc/self/status");
    std::string line;
    while (std::getline(status, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream fields(line.substr(6));
            std::uint64_t kb = 0;
            if (fields >> kb) return kb * 1024;
            return 0;
        }
    }
    return 0;
}

// Total process CPU seconds (user + system), or a negative value on failure.
double read_cpu_seconds() {
    rusage usage{};
    if (getrusage(RUSAGE_SELF, &usage) != 0) return -1.0;
    auto seconds = [](const timeval& tv) {
        return static_cast<double>(tv.tv_sec) + static_cast<double>(tv.tv_usec) * 1e-6;
    };
    return seconds(usage.ru_utime) + seconds(usage.ru_stime);
}

}  // namespace

Profiler::Profiler(ProfilerConfig config, std::int32_t rank)
    : config_(config), rank_(rank) {
    if (config_.monitor_period_ms == 0) config_.monitor_period_ms = 100;
}

Profiler::~Profiler() { stop_monitor(); }

void Profiler::log_event(char kind, Guid guid, std::uint64_t ts_ns) {
    // Caller holds mutex_.
    events_.push_back({kind, guid, ts_ns});
}

void Profiler::bump_diagnostic(const std::string& name) {
    std::lock_guard<std::mutex> lk(counters_mutex_);
    auto& series = counters_[name];
    CounterSample s{now_ns(), series.last + 1.0};
    if (series.count == 0) {
        series.min = s.value;
        series.max = s.value;
    } else {
        series.min = std::min(series.min, s.value);
        series.max = std::max(series.max, s.value);
    }
    ++series.count;
    series.sum += s.value;
    series.last = s.value;
    series.last_ts_ns = s.ts_ns;
    series.samples.push_back(s);
}

void Profiler::on_task_create(const TaskIdentity& identity) {
    if (!config_.enabled) return;
    const std::uint64_t ts = now_ns();
    std::lock_guard<std::mutex> lk(mutex_);
    task_names_[identity.guid] = identity.name;
    if (config_.capture.event_log) log_event('c', identity.guid, ts);
    if (!config_.capture.cpu_timers) return;
    auto [it, inserted] = live_.try_emplace(identity.guid);
    if (!inserted) {
        bump_diagnostic(kLifecycleViolations);
        return;
    }
    TaskTimer& t = it->second;
    t.identity = identity;
    t.create_ns = ts;
    t.state = TimerState::created;
}

void Profiler::on_task_start(Guid guid) {
    if (!config_.enabled) return;
    const std::uint64_t ts = now_ns();
    std::lock_guard<std::mutex> lk(mutex_);
    if (config_.capture.event_log) log_event('s', guid, ts);
    if (!config_.capture.cpu_timers) return;
    auto it = live_.find(guid);
    if (it == live_.end() || it->second.state != TimerState::created) {
        bump_diagnostic(kLifecycleViolations);
        return;
    }
    TaskTimer& t = it->second;
    t.state = TimerState::running;
    t.first_start_ns = ts;
    t.segment_begin_ns = ts;
    t.worker = Scheduler::current_worker_id();
}

void Profiler::on_task_yield(Guid guid) {
    if (!config_.enabled) return;
    const std::uint64_t ts = now_ns();
    std::lock_guard<std::mutex> lk(mutex_);
    if (config_.capture.event_log) log_event('y', guid, ts);
    if (!config_.capture.cpu_timers) return;
    auto it = live_.find(guid);
    if (it == live_.end() || it->second.state != TimerState::running) {
        bump_diagnostic(kLifecycleViolations);
        return;
    }
    TaskTimer& t = it->second;
    t.accumulated_active_ns += ts - t.segment_begin_ns;
    ++t.yield_count;
    t.state = TimerState::yielded;
    if (config_.capture.segments) {
        segments_.push_back({guid, t.identity.parent_guid, t.identity.name, t.worker, t.segment_begin_ns, ts});
    }
}

void Profiler::on_task_resume(Guid guid) {
    if (!config_.enabled) return;
    const std::uint64_t ts = now_ns();
    std::lock_guard<std::mutex> lk(mutex_);
    if (config_.capture.event_log) log_event('r', guid, ts);
    if (!config_.capture.cpu_timers) return;
    auto it = live_.find(guid);
    if (it == live_.end() || it->second.state != TimerState::yielded) {
        bump_diagnostic(kLifecycleViolations);
        return;
    }
    TaskTimer& t = it->second;
    t.state = TimerState::running;
    t.segment_begin_ns = ts;
    t.worker = Scheduler::current_worker_id();
}

void Profiler::on_task_stop(Guid guid) {
    if (!config_.enabled) return;
    const std::uint64_t ts = now_ns();
    std::lock_guard<std::mutex> lk(mutex_);
    if (config_.capture.event_log) log_event('t', guid, ts);
    if (!config_.capture.cpu_timers) return;
    auto it = live_.find(guid);
    if (it == live_.end() || it->second.state != TimerState::running) {
        bump_diagnostic(kLifecycleViolations);
        return;
    }
    TaskTimer& t = it->second;
    t.accumulated_active_ns += ts - t.segment_begin_ns;
    t.last_stop_ns = ts;
    t.state = TimerState::stopped;
    if (config_.capture.segments) {
        segments_.push_back({guid, t.identity.parent_guid, t.identity.name, t.worker, t.segment_begin_ns, ts});
    }

    auto& entry = profile_[t.identity.name];
    if (entry.calls == 0) {
        entry.min_ns = t.accumulated_active_ns;
        entry.max_ns = t.accumulated_active_ns;
    } else {
        entry.min_ns = std::min(entry.min_ns, t.accumulated_active_ns);
        entry.max_ns = std::max(entry.max_ns, t.accumulated_active_ns);
    }
    ++entry.calls;
    entry.total_active_ns += t.accumulated_active_ns;
    entry.total_yields += t.yield_count;

    if (t.identity.parent_guid != kRootGuid) {
        auto parent = task_names_.find(t.identity.parent_guid);
        if (parent != task_names_.end()) {
            ++edges_[{parent->second, t.identity.name}];
        }
    }
    if (should_sample(guid, config_.scatter_fraction, config_.sampling_seed)) {
        scatter_.push_back({t.identity.name, t.first_start_ns, t.accumulated_active_ns});
    }
    live_.erase(it);
}

void Profiler::sample_counter(const std::string& name, double value) {
    if (!config_.enabled || !config_.capture.counters) return;
    if (std::isnan(value)) {
        bump_diagnostic(kBadSamples);
        return;
    }
    std::lock_guard<std::mutex> lk(counters_mutex_);
    auto& series = counters_[name];
    CounterSample s{now_ns(), value};
    if (series.count == 0) {
        series.min = value;
        series.max = value;
    } else {
        series.min = std::min(series.min, value);
        series.max = std::max(series.max, value);
    }
    ++series.count;
    series.sum += value;
    series.last = value;
    series.last_ts_ns = s.ts_ns;
    series.samples.push_back(s);
}

std::vector<CounterSample> Profiler::monitor_tick() {
    std::vector<CounterSample> captured;
    if (!config_.enabled || !config_.capture.os_monitor) return captured;

    std::uint64_t rss = read_rss_bytes();
    std::uint64_t peak = read_peak_rss_bytes();
    double cpu_s = read_cpu_seconds();
    const std::uint64_t wall = now_ns();

    double cpu_fraction = -1.0;
    {
        std::lock_guard<std::mutex> lk(monitor_mutex_);
        if (cpu_s >= 0.0 && monitor_prev_wall_ns_ != 0 && wall > monitor_prev_wall_ns_) {
            cpu_fraction = (cpu_s - monitor_prev_cpu_s_) /
                           (static_cast<double>(wall - monitor_prev_wall_ns_) * 1e-9);
            if (cpu_fraction < 0.0) cpu_fraction = 0.0;
        }
        if (cpu_s >= 0.0) {
            monitor_prev_wall_ns_ = wall;
            monitor_prev_cpu_s_ = cpu_s;
        }
    }

    auto emit = [&](const char* name, double value) {
        sample_counter(name, value);
        captured.push_back({wall, value});
    };
    if (rss > 0) {
        emit(kOsRssBytes, static_cast<double>(rss));
    } else {
        bump_diagnostic(kMonitorFailures);
    }
    if (peak > 0) {
        emit(kOsPeakRssBytes, static_cast<double>(peak));
    } else {
        bump_diagnostic(kMonitorFailures);
    }
    if (cpu_fraction >= 0.0) emit(kOsCpuFraction, cpu_fraction);
    return captured;
}

void Profiler::start_monitor() {
    if (!config_.enabled || !config_.capture.os_monitor) return;
    if (monitor_.joinable()) return;
    {
        std::lock_guard<std::mutex> lk(monitor_mutex_);
        monitor_stop_ = false;
    }
    monitor_ = std::thread([this] { monitor_main(); });
}

void Profiler::stop_monitor() {
    {
        std::lock_guard<std::mutex> lk(monitor_mutex_);
        monitor_stop_ = true;
        monitor_cv_.notify_all();
    }
    if (monitor_.joinable()) monitor_.join();
}

void Profiler::monitor_main() {
    const auto period = std::chrono::milliseconds(config_.monitor_period_ms);
    auto next = std::chrono::steady_clock::now() + period;
    std::unique_lock<std::mutex> lk(monitor_mutex_);
    for (;;) {
        if (monitor_cv_.wait_until(lk, next, [this] { return monitor_stop_; })) break;
        lk.unlock();
        monitor_tick();
        lk.lock();
        next += period;
    }
}

void Profiler::deliver_activity(const ActivityRecord& record) {
    if (!config_.enabled || !config_.capture.device_activity) return;
    std::lock_guard<std::mutex> lk(mutex_);
    activity_.push_back(record);
    if (config_.capture.event_log) log_event('a', record.correlation_guid, record.end_ns);
    // Timed device work joins the flat profile alongside CPU tasks, the way
    // GPU task profiles sit next to CPU task profiles in APEX-style output.
    // Alloc/free records are bookkeeping, not timed work.
    if (record.kind == ActivityKind::alloc || record.kind == ActivityKind::free) return;
    const std::uint64_t duration = record.end_ns - record.start_ns;
    auto& entry = profile_[record.name];
    if (entry.calls == 0) {
        entry.min_ns = duration;
        entry.max_ns = duration;
    } else {
        entry.min_ns = std::min(entry.min_ns, duration);
        entry.max_ns = std::max(entry.max_ns, duration);
    }
    ++entry.calls;
    entry.total_active_ns += duration;
}

Snapshot Profiler::snapshot(bool include_running) const {
    Snapshot s;
    s.rank = rank_;
    if (!config_.enabled) return s;
    {
        std::lock_guard<std::mutex> lk(mutex_);
        s.profile = profile_;
        s.edges = edges_;
        s.scatter = scatter_;
        s.segments = segments_;
        s.activity = activity_;
        if (include_running) {
            const std::uint64_t ts = now_ns();
            for (const auto& [guid, t] : live_) {
                if (t.state != TimerState::running && t.state != TimerState::yielded) continue;
                std::uint64_t active = t.accumulated_active_ns;
                if (t.state == TimerState::running && ts > t.segment_begin_ns) {
                    active += ts - t.segment_begin_ns;
                }
                auto& entry = s.profile[t.identity.name];
                if (entry.calls == 0) {
                    entry.min_ns = active;
                    entry.max_ns = active;
                } else {
                    entry.min_ns = std::min(entry.min_ns, active);
                    entry.max_ns = std::max(entry.max_ns, active);
                }
                ++entry.calls;
                entry.total_active_ns += active;
                entry.total_yields += t.yield_count;
            }
        }
    }
    {
        std::lock_guard<std::mutex> lk(counters_mutex_);
        s.counters = counters_;
    }
    return s;
}

std::vector<Profiler::RawEvent> Profiler::event_log() const {
    std::lock_guard<std::mutex> lk(mutex_);
    return events_;
}

}  // namespace taskscope

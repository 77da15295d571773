// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <queue>
#include <string>
#include <thread>
#include <vector>

#include "taskscope/snapshot.hpp"
#include "taskscope/token.hpp"

namespace taskscope {

class Profiler;

struct DeviceConfig {
    std::int32_t device_id = 0;
    std::uint32_t stream_count = 128;
    double copy_bandwidth_bytes_per_s = 1e9;
    std::uint32_t activity_buffer_capacity = 1024;
};

struct DeviceMemoryState {
    std::uint64_t current_device_bytes = 0;
    std::uint64_t peak_device_bytes = 0;
    std::uint64_t current_host_pinned_bytes = 0;
    std::uint64_t peak_host_pinned_bytes = 0;
};

// Device memory counter names, sampled on every alloc/free.
inline constexpr const char* kDeviceCurrentBytes = "device.current_bytes";
inline constexpr const char* kDevicePeakBytes = "device.peak_bytes";

// Simulated accelerator: a pool of in-order streams fed by launch calls and
// drained by an engine thread against the real clock. Work on one stream
// serializes; work on distinct streams overlaps. Completed work produces
// buffered ActivityRecords delivered on flush (or automatically when the
// buffer fills and at shutdown), CUPTI-style.
class SimDevice {
public:
    // `sink` (optional) receives auto-flushed records and memory counters.
    explicit SimDevice(DeviceConfig config = {}, Profiler* sink = nullptr);
    ~SimDevice();

    SimDevice(const SimDevice&) = delete;
    SimDevice& operator=(const SimDevice&) = delete;

    // Occupies `stream_id` for `duration_ns` after all previously enqueued
    // work on that stream. The token fulfills once the kernel has finished
    // on the device timeline (never before the real clock reaches its end).
    CompletionToken launch_kernel(const std::string& name, std::uint32_t stream_id,
                                  std::uint64_t duration_ns, Guid launching_task);

    CompletionToken enqueue_copy(ActivityKind kind, std::uint64_t bytes,
                                 std::uint32_t stream_id, Guid launching_task);

    std::uint64_t device_alloc(std::uint64_t bytes);
    void device_free(std::uint64_t handle);
    std::uint64_t host_pinned_alloc(std::uint64_t bytes);
    void host_pinned_free(std::uint64_t handle);

    DeviceMemoryState memory_state() const;

    // Delivers all completed, undelivered records to `sink`; returns the
    // count. Within one stream, delivery follows start order.
    std::uint64_t flush_activity(Profiler& sink);
    // Same, to the default sink; without one the records stay buffered.
    std::uint64_t flush_activity();

    // Waits for in-flight work, delivers what remains, stops the engine.
    void shutdown();

    const DeviceConfig& config() const { return config_; }

private:
    struct Pending {
        std::uint64_t end_ns;
        std::uint64_t seq;
        ActivityRecord record;
        PromiseHandle done;
    };
    struct PendingLater {
        bool operator()(const Pending& a, const Pending& b) const {
            if (a.end_ns != b.end_ns) return a.end_ns > b.end_ns;
            return a.seq > b.seq;
        }
    };

    CompletionToken enqueue_timed(ActivityRecord record, std::uint32_t stream_id,
                                  std::uint64_t duration_ns);
    void engine_main();
    std::uint64_t flush_to(Profiler* sink);
    // Pre: mutex_ held. Returns records to deliver if the buffer is full.
    std::vector<ActivityRecord> take_if_full();

    DeviceConfig config_;
    Profiler* default_sink_;

    mutable std::mutex mutex_;
    std::condition_variable engine_cv_;
    std::vector<std::uint64_t> stream_tail_ns_;
    std::priority_queue<Pending, std::vector<Pending>, PendingLater> pending_;
    std::vector<ActivityRecord> completed_;
    std::uint64_t next_seq_ = 0;
    bool stopping_ = false;

    DeviceMemoryState memory_;
    std::map<std::uint64_t, std::uint64_t> device_allocs_;       // handle -> bytes
    std::map<std::uint64_t, std::uint64_t> host_pinned_allocs_;  // handle -> bytes
    std::uint64_t next_handle_ = 1;

    std::thread engine_;
};

}  // namespace taskscope

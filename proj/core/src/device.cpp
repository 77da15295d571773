// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/device.hpp"

#include <algorithm>
#include <stdexcept>

#include "taskscope/clock.hpp"
#include "taskscope/profiler.hpp"

namespace taskscope {

SimDevice::SimDevice(DeviceConfig config, Profiler* sink)
    : config_(config), default_sink_(sink) {
    if (config_.stream_count == 0) config_.stream_count = 1;
    if (config_.activity_buffer_capacity == 0) config_.activity_buffer_capacity = 1;
    stream_tail_ns_.resize(config_.stream_count, 0);
    engine_ = std::thread([this] { engine_main(); });
}

SimDevice::~SimDevice() { shutdown(); }

CompletionToken SimDevice::launch_kernel(const std::string& name, std::uint32_t stream_id,
                                         std::uint64_t duration_ns, Guid launching_task) {
    if (duration_ns == 0) throw std::invalid_argument("kernel duration must be positive");
    ActivityRecord record;
    record.kind = ActivityKind::kernel;
    record.name = name;
    record.correlation_guid = launching_task;
    return enqueue_timed(std::move(record), stream_id, duration_ns);
}

CompletionToken SimDevice::enqueue_copy(ActivityKind kind, std::uint64_t bytes,
                                        std::uint32_t stream_id, Guid launching_task) {
    if (kind != ActivityKind::copy_host_to_device && kind != ActivityKind::copy_device_to_host &&
        kind != ActivityKind::copy_device_to_device) {
        throw std::invalid_argument("not a copy kind");
    }
    if (bytes == 0) throw std::invalid_argument("copy of zero bytes");
    ActivityRecord record;
    record.kind = kind;
    record.name = to_string(kind);
    record.bytes = bytes;
    record.correlation_guid = launching_task;
    auto duration_ns = static_cast<std::uint64_t>(
        static_cast<double>(bytes) / config_.copy_bandwidth_bytes_per_s * 1e9);
    if (duration_ns == 0) duration_ns = 1;
    return enqueue_timed(std::move(record), stream_id, duration_ns);
}

CompletionToken SimDevice::enqueue_timed(ActivityRecord record, std::uint32_t stream_id,
                                         std::uint64_t duration_ns) {
    if (stream_id >= config_.stream_count) throw std::invalid_argument("invalid stream id");
    record.device_id = config_.device_id;
    record.stream_id = static_cast<std::int32_t>(stream_id);

    PromiseHandle done;
    CompletionToken token = done.token();
    {
        std::lock_guard<std::mutex> lk(mutex_);
        if (stopping_) throw std::runtime_error("device is shut down");
        // Analytic timeline: the stream picks the work up as soon as it is
        // free, never before now.
        const std::uint64_t start = std::max(now_ns(), stream_tail_ns_[stream_id]);
        record.start_ns = start;
        record.end_ns = start + duration_ns;
        stream_tail_ns_[stream_id] = record.end_ns;
        pending_.push({record.end_ns, next_seq_++, std::move(record), std::move(done)});
    }
    engine_cv_.notify_all();
    return token;
}

void SimDevice::engine_main() {
    std::unique_lock<std::mutex> lk(mutex_);
    for (;;) {
        if (stopping_ && pending_.empty()) break;
        if (pending_.empty()) {
            engine_cv_.wait(lk);
            continue;
        }
        const std::uint64_t next_end = pending_.top().end_ns;
        if (now_ns() < next_end) {
            engine_cv_.wait_until(lk, RunClock::instance().to_time_point(next_end));
            continue;
        }
        // Retire everything due; fulfill tokens outside the lock.
        std::vector<PromiseHandle> due;
        const std::uint64_t now = now_ns();
        while (!pending_.empty() && pending_.top().end_ns <= now) {
            Pending p = pending_.top();
            pending_.pop();
            completed_.push_back(std::move(p.record));
            due.push_back(std::move(p.done));
        }
        std::vector<ActivityRecord> to_deliver = take_if_full();
        lk.unlock();
        for (auto& d : due) d.set_value();
        for (const auto& r : to_deliver) default_sink_->deliver_activity(r);
        lk.lock();
    }
}

std::vector<ActivityRecord> SimDevice::take_if_full() {
    std::vector<ActivityRecord> batch;
    if (default_sink_ != nullptr && completed_.size() >= config_.activity_buffer_capacity) {
        batch.swap(completed_);
    }
    return batch;
}

std::uint64_t SimDevice::flush_to(Profiler* sink) {
    std::vector<ActivityRecord> batch;
    {
        std::lock_guard<std::mutex> lk(mutex_);
        batch.swap(completed_);
    }
    if (sink != nullptr) {
        for (const auto& r : batch) sink->deliver_activity(r);
    }
    return batch.size();
}

std::uint64_t SimDevice::flush_activity(Profiler& sink) { return flush_to(&sink); }

std::uint64_t SimDevice::flush_activity() {
    if (default_sink_ == nullptr) return 0;
    return flush_to(default_sink_);
}

std::uint64_t SimDevice::device_alloc(std::uint64_t bytes) {
    if (bytes == 0) throw std::invalid_argument("zero-byte allocation");
    std::uint64_t handle = 0;
    std::uint64_t current = 0, peak = 0;
    ActivityRecord record;
    std::vector<ActivityRecord> overflow;
    {
        std::lock_guard<std::mutex> lk(mutex_);
        handle = next_handle_++;
        device_allocs_[handle] = bytes;
        memory_.current_device_bytes += bytes;
        memory_.peak_device_bytes =
            std::max(memory_.peak_device_bytes, memory_.current_device_bytes);
        current = memory_.current_device_bytes;
        peak = memory_.peak_device_bytes;
        record.kind = ActivityKind::alloc;
        record.name = "device_alloc";
        record.device_id = config_.device_id;
        record.stream_id = -1;
        record.start_ns = record.end_ns = now_ns();
        record.bytes = bytes;
        record.correlation_guid = 0;
        completed_.push_back(record);
        overflow = take_if_full();
    }
    for (const auto& r : overflow) default_sink_->deliver_activity(r);
    if (default_sink_ != nullptr) {
        default_sink_->sample_counter(kDeviceCurrentBytes, static_cast<double>(current));
        default_sink_->sample_counter(kDevicePeakBytes, static_cast<double>(peak));
    }
    return handle;
}

void SimDevice::device_free(std::uint64_t handle) {
    std::uint64_t current = 0, peak = 0;
    std::vector<ActivityRecord> overflow;
    {
        std::lock_guard<std::mutex> lk(mutex_);
        auto it = device_allocs_.find(handle);
        if (it == device_allocs_.end()) {
            throw std::invalid_argument("free of unknown or already-freed device handle");
        }
        const std::uint64_t bytes = it->second;
        device_allocs_.erase(it);
        memory_.current_device_bytes -= bytes;
        current = memory_.current_device_bytes;
        peak = memory_.peak_device_bytes;
        ActivityRecord record;
        record.kind = ActivityKind::free;
        record.name = "device_free";
        record.device_id = config_.device_id;
        record.stream_id = -1;
        record.start_ns = record.end_ns = now_ns();
        record.bytes = bytes;
        record.correlation_guid = 0;
        completed_.push_back(record);
        overflow = take_if_full();
    }
    for (const auto& r : overflow) default_sink_->deliver_activity(r);
    if (default_sink_ != nullptr) {
        default_sink_->sample_counter(kDeviceCurrentBytes, static_cast<double>(current));
        default_sink_->sample_counter(kDevicePeakBytes, static_cast<double>(peak));
    }
}

std::uint64_t SimDevice::host_pinned_alloc(std::uint64_t bytes) {
    if (bytes == 0) throw std::invalid_argument("zero-byte allocation");
    std::lock_guard<std::mutex> lk(mutex_);
    const std::uint64_t handle = next_handle_++;
    host_pinned_allocs_[handle] = bytes;
    memory_.current_host_pinned_bytes += bytes;
    memory_.peak_host_pinned_bytes =
        std::max(memory_.peak_host_pinned_bytes, memory_.current_host_pinned_bytes);
    return handle;
}

void SimDevice::host_pinned_free(std::uint64_t handle) {
    std::lock_guard<std::mutex> lk(mutex_);
    auto it = host_pinned_allocs_.find(handle);
    if (it == host_pinned_allocs_.end()) {
        throw std::invalid_argument("free of unknown or already-freed pinned handle");
    }
    memory_.current_host_pinned_bytes -= it->second;
    host_pinned_allocs_.erase(it);
}

DeviceMemoryState SimDevice::memory_state() const {
    std::lock_guard<std::mutex> lk(mutex_);
    return memory_;
}

void SimDevice::shutdown() {
    {
        std::unique_lock<std::mutex> lk(mutex_);
        if (stopping_ && !engine_.joinable()) return;
        stopping_ = true;
    }
    engine_cv_.notify_all();
    if (engine_.joinable()) engine_.join();
    // Engine has retired everything; hand the remainder to the default sink.
    flush_activity();
}

}  // namespace taskscope

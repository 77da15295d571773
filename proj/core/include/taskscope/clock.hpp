// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>

namespace taskscope {

// One monotonic nanosecond clock per process, zeroed the first time anyone
// reads it. Every timestamp in the toolkit (task timers, counter samples,
// device activity) is expressed on this clock so they interleave in exports.
class RunClock {
public:
    static RunClock& instance();

    std::uint64_t now_ns() const {
        return static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::nanoseconds>(
                std::chrono::steady_clock::now() - epoch_)
                .count());
    }

    // Real deadline corresponding to a timestamp on this clock.
    std::chrono::steady_clock::time_point to_time_point(std::uint64_t ns) const {
        return epoch_ + std::chrono::nanoseconds(ns);
    }

    std::chrono::steady_clock::time_point epoch() const { return epoch_; }

private:
    RunClock() : epoch_(std::chrono::steady_clock::now()) {}
    std::chrono::steady_clock::time_point epoch_;
};

inline std::uint64_t now_ns() { return RunClock::instance().now_ns(); }

}  // namespace taskscope

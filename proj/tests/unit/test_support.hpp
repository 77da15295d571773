// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "taskscope/hooks.hpp"

namespace tstest {

// Captures the raw lifecycle stream; the per-test oracle replays it.
class RecordingHooks : public taskscope::LifecycleHooks {
public:
    struct Event {
        char kind;  // 'c'reate, 's'tart, 'y'ield, 'r'esume, s't'op
        taskscope::Guid guid;
    };

    void on_task_create(const taskscope::TaskIdentity& id) override {
        std::lock_guard<std::mutex> lk(m_);
        events_.push_back({'c', id.guid});
        created_.push_back(id);
    }
    void on_task_start(taskscope::Guid g) override { push('s', g); }
    void on_task_yield(taskscope::Guid g) override { push('y', g); }
    void on_task_resume(taskscope::Guid g) override { push('r', g); }
    void on_task_stop(taskscope::Guid g) override { push('t', g); }

    std::vector<Event> events() const {
        std::lock_guard<std::mutex> lk(m_);
        return events_;
    }
    std::vector<taskscope::TaskIdentity> created() const {
        std::lock_guard<std::mutex> lk(m_);
        return created_;
    }
    std::vector<char> history_of(taskscope::Guid g) const {
        std::lock_guard<std::mutex> lk(m_);
        std::vector<char> h;
        for (const auto& e : events_)
            if (e.guid == g) h.push_back(e.kind);
        return h;
    }
    std::size_t count(char kind, taskscope::Guid g) const {
        std::lock_guard<std::mutex> lk(m_);
        std::size_t n = 0;
        for (const auto& e : events_)
            if (e.kind == kind && e.guid == g) ++n;
        return n;
    }
    std::size_t count_kind(char kind) const {
        std::lock_guard<std::mutex> lk(m_);
        std::size_t n = 0;
        for (const auto& e : events_)
            if (e.kind == kind) ++n;
        return n;
    }

private:
    void push(char kind, taskscope::Guid g) {
        std::lock_guard<std::mutex> lk(m_);
        events_.push_back({kind, g});
    }
    mutable std::mutex m_;
    std::vector<Event> events_;
    std::vector<taskscope::TaskIdentity> created_;
};

inline bool eventually(const std::function<bool()>& pred, int timeout_ms = 5000) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    return pred();
}

}  // namespace tstest

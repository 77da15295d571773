// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/token.hpp"

#include "taskscope/scheduler.hpp"

namespace taskscope {

bool TokenState::fulfill(std::any value) {
    std::vector<TaskWaiter> waiters;
    {
        std::lock_guard<std::mutex> lk(m_);
        if (fulfilled_) return false;
        fulfilled_ = true;
        value_ = std::move(value);
        waiters.swap(task_waiters_);
        if (!waiters.empty()) observed_ = true;
    }
    cv_.notify_all();
    for (auto& w : waiters) w->scheduler->resume_waiter(std::move(w));
    return true;
}

bool TokenState::add_task_waiter(const TaskWaiter& w,
                                 const std::function<void()>& pre_register) {
    std::lock_guard<std::mutex> lk(m_);
    if (fulfilled_) return false;
    pre_register();
    task_waiters_.push_back(w);
    return true;
}

std::any TokenState::wait_blocking() {
    if (Scheduler::current_worker_id() >= 0) {
        throw std::logic_error("wait_blocking called from inside a worker; tasks must co_await");
    }
    std::unique_lock<std::mutex> lk(m_);
    cv_.wait(lk, [this] { return fulfilled_; });
    observed_ = true;
    return value_;
}

}  // namespace taskscope

// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <any>
#include <condition_variable>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

namespace taskscope {

class Scheduler;
struct TaskRecord;

// Single-assignment completion state shared between a promise and any number
// of waiters. Transitions pending -> fulfilled exactly once; every waiter
// registered before fulfillment is released exactly once.
class TokenState {
public:
    using TaskWaiter = std::shared_ptr<TaskRecord>;

    bool fulfilled() const {
        std::lock_guard<std::mutex> lk(m_);
        return fulfilled_;
    }

    // Returns false if already fulfilled (the error is the caller's to signal).
    bool fulfill(std::any value);

    // Registers a suspended task; returns false if the token is already
    // fulfilled, in which case the caller must not suspend.
    // `pre_register` runs under the token lock just before the waiter is
    // handed off, while the registering thread still owns the task.
    bool add_task_waiter(const TaskWaiter& w, const std::function<void()>& pre_register);

    // Blocks the calling OS thread until fulfillment. Used by drivers outside
    // any task context.
    std::any wait_blocking();

    std::any value() const {
        std::lock_guard<std::mutex> lk(m_);
        observed_ = true;
        return value_;
    }

    // True once somebody consumed the result: a registered waiter was
    // released, value() was read, or a blocking wait returned. Failures in
    // never-observed tokens are reported by the scheduler at idle.
    bool observed() const {
        std::lock_guard<std::mutex> lk(m_);
        return observed_;
    }

private:
    mutable std::mutex m_;
    std::condition_variable cv_;
    bool fulfilled_ = false;
    mutable bool observed_ = false;
    std::any value_;
    std::vector<TaskWaiter> task_waiters_;
};

using CompletionToken = std::shared_ptr<TokenState>;

class PromiseAlreadyFulfilled : public std::logic_error {
public:
    PromiseAlreadyFulfilled() : std::logic_error("promise fulfilled twice") {}
};

// Writer end of a promise/future pair. Copyable handle; all copies refer to
// the same single-assignment state.
class PromiseHandle {
public:
    PromiseHandle() : state_(std::make_shared<TokenState>()) {}

    CompletionToken token() const { return state_; }

    void set_value(std::any v = {}) {
        if (!state_->fulfill(std::move(v))) throw PromiseAlreadyFulfilled();
    }

    // Lost-race-tolerant variant: reports instead of throwing.
    bool try_set_value(std::any v = {}) { return state_->fulfill(std::move(v)); }

    void set_exception(std::exception_ptr ep) {
        if (!state_->fulfill(std::any(ep))) throw PromiseAlreadyFulfilled();
    }

private:
    CompletionToken state_;
};

inline std::pair<PromiseHandle, CompletionToken> make_promise() {
    PromiseHandle p;
    CompletionToken t = p.token();
    return {std::move(p), std::move(t)};
}

// A fulfilled value holding an exception_ptr rethrows at the await site.
inline std::any unwrap_payload(std::any v) {
    if (auto* ep = std::any_cast<std::exception_ptr>(&v)) std::rethrow_exception(*ep);
    return v;
}

}  // namespace taskscope

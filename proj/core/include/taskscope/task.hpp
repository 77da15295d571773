// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <any>
#include <coroutine>
#include <exception>
#include <utility>

#include "taskscope/token.hpp"

namespace taskscope {

class Scheduler;
struct TaskRecord;

namespace detail {
// Bridges between the scheduler translation unit and the coroutine glue
// below. Defined in scheduler.cpp.
void task_reached_final_suspend(TaskRecord* record) noexcept;
bool token_awaiter_suspend(TaskRecord* record, const CompletionToken& token);
}  // namespace detail

// Awaiter produced for `co_await token`. If the token is already fulfilled
// the task continues on the spot with no yield event; otherwise the task is
// parked on the token and the worker moves on.
class TokenAwaiter {
public:
    TokenAwaiter(TaskRecord* record, CompletionToken token)
        : record_(record), token_(std::move(token)) {}

    bool await_ready() const noexcept { return token_->fulfilled(); }

    bool await_suspend(std::coroutine_handle<>) {
        return detail::token_awaiter_suspend(record_, token_);
    }

    // Rethrows if the token carries an exception payload.
    std::any await_resume() { return unwrap_payload(token_->value()); }

private:
    TaskRecord* record_;
    CompletionToken token_;
};

// Coroutine body of a task. A Task is inert until handed to
// Scheduler::spawn; constructing one merely allocates the frame.
class Task {
public:
    struct promise_type {
        TaskRecord* record = nullptr;
        std::exception_ptr failure;

        Task get_return_object() {
            return Task(std::coroutine_handle<promise_type>::from_promise(*this));
        }
        std::suspend_always initial_suspend() noexcept { return {}; }

        struct FinalAwaiter {
            bool await_ready() const noexcept { return false; }
            void await_suspend(std::coroutine_handle<promise_type> h) noexcept {
                detail::task_reached_final_suspend(h.promise().record);
            }
            void await_resume() const noexcept {}
        };
        FinalAwaiter final_suspend() noexcept { return {}; }

        void return_void() noexcept {}
        void unhandled_exception() noexcept { failure = std::current_exception(); }

        // Tasks may only await completion tokens.
        TokenAwaiter await_transform(CompletionToken token) {
            return TokenAwaiter(record, std::move(token));
        }
    };

    using Handle = std::coroutine_handle<promise_type>;

    Task() = default;
    explicit Task(Handle handle) : handle_(handle) {}
    Task(Task&& other) noexcept : handle_(std::exchange(other.handle_, nullptr)) {}
    Task& operator=(Task&& other) noexcept {
        if (this != &other) {
            if (handle_) handle_.destroy();
            handle_ = std::exchange(other.handle_, nullptr);
        }
        return *this;
    }
    Task(const Task&) = delete;
    Task& operator=(const Task&) = delete;
    ~Task() {
        if (handle_) handle_.destroy();
    }

    bool valid() const noexcept { return handle_ != nullptr; }

    // Transfers frame ownership to the caller (the scheduler).
    Handle release() noexcept { return std::exchange(handle_, nullptr); }

private:
    Handle handle_ = nullptr;
};

}  // namespace taskscope

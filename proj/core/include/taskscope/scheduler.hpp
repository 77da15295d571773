// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "taskscope/hooks.hpp"
#include "taskscope/identity.hpp"
#include "taskscope/task.hpp"
#include "taskscope/token.hpp"

namespace taskscope {

enum class RunQueuePolicy { fifo };

struct SchedulerConfig {
    unsigned worker_count = 1;
    std::uint64_t seed = 0;
    RunQueuePolicy run_queue_policy = RunQueuePolicy::fifo;
    // How long the run may sit with no runnable or running task before the
    // idle wait gives up and reports a cycle.
    std::uint64_t deadlock_timeout_ms = 10000;
};

// Thrown by run_until_idle when pending tasks can never run again.
class DeadlockError : public std::runtime_error {
public:
    DeadlockError(std::string what, std::vector<TaskIdentity> suspended)
        : std::runtime_error(std::move(what)), suspended_tasks(std::move(suspended)) {}
    std::vector<TaskIdentity> suspended_tasks;
};

class SchedulerStopped : public std::runtime_error {
public:
    SchedulerStopped() : std::runtime_error("scheduler is stopped") {}
};

// One spawned task. Owned jointly by the run queues, token wait lists and
// the spawner's completion token until the frame finishes.
struct TaskRecord : std::enable_shared_from_this<TaskRecord> {
    TaskIdentity identity;
    Scheduler* scheduler = nullptr;
    Task::Handle frame;
    PromiseHandle done;
    bool started = false;  // touched only by the worker holding the task

    ~TaskRecord() {
        if (frame) frame.destroy();
    }
};

// Cooperative multi-worker task scheduler. Each worker owns a FIFO run
// queue; an idle worker steals from the highest-indexed non-empty queue.
// Tasks are coroutines that suspend by awaiting completion tokens and may
// resume on a different worker than the one they started on.
class Scheduler {
public:
    explicit Scheduler(SchedulerConfig config = {}, LifecycleHooks* hooks = nullptr,
                       std::int32_t locality = 0);
    ~Scheduler();

    Scheduler(const Scheduler&) = delete;
    Scheduler& operator=(const Scheduler&) = delete;

    // Queues a task body for execution. Returns the token fulfilled when the
    // task finishes (with an exception payload if the body threw). A task
    // spawned without a name lands in the "unnamed-task" bucket; one spawned
    // without an explicit parent is attributed to the current task if called
    // from worker context, else to the implicit root.
    CompletionToken spawn(std::optional<std::string> name, Task body);
    CompletionToken spawn(std::optional<std::string> name, std::optional<Guid> parent,
                          Task body);
    // Convenience for plain (non-suspending) work.
    CompletionToken spawn_fn(std::optional<std::string> name, std::function<void()> fn);

    // Blocks the calling (non-worker) thread until no task is pending.
    // Returns elapsed wall time in nanoseconds. Throws DeadlockError if the
    // run wedges, and rethrows the first failure of a task nobody awaited.
    std::uint64_t run_until_idle();

    void stop();

    unsigned worker_count() const { return static_cast<unsigned>(workers_.size()); }
    std::int32_t locality() const { return locality_; }
    std::uint64_t tasks_spawned() const { return next_guid_.load() - 1; }

    // Always-on per-name spawn totals, independent of any profiler.
    std::map<std::string, std::uint64_t> spawn_counts() const;

    // Identity of the task currently running on this thread, or the implicit
    // root when called from outside a worker.
    static TaskIdentity current_identity();
    // Worker index on this thread, or -1 outside workers.
    static int current_worker_id();

private:
    friend void detail::task_reached_final_suspend(TaskRecord*) noexcept;
    friend bool detail::token_awaiter_suspend(TaskRecord*, const CompletionToken&);
    friend class TokenState;

    void worker_main(unsigned index);
    void enqueue(std::shared_ptr<TaskRecord> record);
    void resume_waiter(std::shared_ptr<TaskRecord> record);
    std::shared_ptr<TaskRecord> next_runnable(unsigned index);
    void note_suspended_locked_out(const TaskRecord& record);
    void task_finished(TaskRecord* record);

    SchedulerConfig config_;
    LifecycleHooks* hooks_;
    std::int32_t locality_;

    mutable std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable idle_cv_;
    std::vector<std::deque<std::shared_ptr<TaskRecord>>> queues_;
    std::map<Guid, TaskIdentity> suspended_;
    std::map<std::string, std::uint64_t> spawn_counts_;
    // Failed tasks whose done token nobody has consumed yet; checked at idle.
    std::vector<std::pair<std::exception_ptr, CompletionToken>> failures_;
    std::uint64_t pending_ = 0;  // spawned but not yet finished
    unsigned running_ = 0;
    std::uint64_t activity_epoch_ = 0;
    bool stopping_ = false;

    std::atomic<Guid> next_guid_{1};
    std::vector<std::thread> workers_;
};

}  // namespace taskscope

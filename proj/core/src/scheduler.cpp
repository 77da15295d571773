// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/scheduler.hpp"

#include <chrono>
#include <sstream>

#include "taskscope/clock.hpp"
#include "taskscope/sampling.hpp"

namespace taskscope {

namespace {
thread_local TaskRecord* tl_current_task = nullptr;
thread_local Scheduler* tl_worker_scheduler = nullptr;
thread_local int tl_worker_id = -1;
thread_local bool tl_task_finished = false;

Task fn_task(std::function<void()> fn) {
    fn();
    co_return;
}
}  // namespace

namespace detail {

void task_reached_final_suspend(TaskRecord* record) noexcept {
    record->scheduler->task_finished(record);
    tl_task_finished = true;
}

bool token_awaiter_suspend(TaskRecord* record, const CompletionToken& token) {
    Scheduler* sched = record->scheduler;
    // The yield event and suspension bookkeeping happen under the token lock,
    // before the waiter becomes visible to any fulfiller. Once add_task_waiter
    // returns true this thread no longer owns the task.
    return token->add_task_waiter(record->shared_from_this(), [&] {
        if (sched->hooks_) sched->hooks_->on_task_yield(record->identity.guid);
        sched->note_suspended_locked_out(*record);
    });
}

}  // namespace detail

Scheduler::Scheduler(SchedulerConfig config, LifecycleHooks* hooks, std::int32_t locality)
    : config_(config), hooks_(hooks), locality_(locality) {
    if (config_.worker_count == 0) config_.worker_count = 1;
    queues_.resize(config_.worker_count);
    workers_.reserve(config_.worker_count);
    for (unsigned i = 0; i < config_.worker_count; ++i) {
        workers_.emplace_back([this, i] { worker_main(i); });
    }
}

Scheduler::~Scheduler() { stop(); }

CompletionToken Scheduler::spawn(std::optional<std::string> name, Task body) {
    return spawn(std::move(name), std::nullopt, std::move(body));
}

CompletionToken Scheduler::spawn(std::optional<std::string> name, std::optional<Guid> parent,
                                 Task body) {
    if (!body.valid()) throw std::invalid_argument("spawn of an empty task body");
    auto record = std::make_shared<TaskRecord>();
    record->identity.guid = next_guid_.fetch_add(1, std::memory_order_relaxed);
    record->identity.name = name ? std::move(*name) : std::string(kUnnamedTask);
    if (parent) {
        record->identity.parent_guid = *parent;
    } else if (tl_current_task != nullptr && tl_current_task->scheduler == this) {
        record->identity.parent_guid = tl_current_task->identity.guid;
    } else {
        record->identity.parent_guid = kRootGuid;
    }
    record->identity.locality = locality_;
    record->scheduler = this;
    record->frame = body.release();
    record->frame.promise().record = record.get();
    {
        std::lock_guard<std::mutex> lk(mutex_);
        if (stopping_) throw SchedulerStopped();
        ++spawn_counts_[record->identity.name];
        ++pending_;
        ++activity_epoch_;
    }
    if (hooks_) hooks_->on_task_create(record->identity);
    CompletionToken done = record->done.token();
    enqueue(std::move(record));
    return done;
}

CompletionToken Scheduler::spawn_fn(std::optional<std::string> name, std::function<void()> fn) {
    return spawn(std::move(name), std::nullopt, fn_task(std::move(fn)));
}

void Scheduler::enqueue(std::shared_ptr<TaskRecord> record) {
    std::lock_guard<std::mutex> lk(mutex_);
    unsigned target;
    if (tl_worker_scheduler == this) {
        target = static_cast<unsigned>(tl_worker_id);
    } else {
        target = static_cast<unsigned>(mix64(record->identity.guid, config_.seed) %
                                       queues_.size());
    }
    queues_[target].push_back(std::move(record));
    ++activity_epoch_;
    work_cv_.notify_one();
}

void Scheduler::resume_waiter(std::shared_ptr<TaskRecord> record) {
    std::lock_guard<std::mutex> lk(mutex_);
    suspended_.erase(record->identity.guid);
    unsigned target;
    if (tl_worker_scheduler == this) {
        target = static_cast<unsigned>(tl_worker_id);
    } else {
        target = static_cast<unsigned>(mix64(record->identity.guid, config_.seed) %
                                       queues_.size());
    }
    queues_[target].push_back(std::move(record));
    ++activity_epoch_;
    work_cv_.notify_one();
}

void Scheduler::note_suspended_locked_out(const TaskRecord& record) {
    std::lock_guard<std::mutex> lk(mutex_);
    suspended_[record.identity.guid] = record.identity;
}

void Scheduler::task_finished(TaskRecord* record) {
    if (hooks_) hooks_->on_task_stop(record->identity.guid);
    std::exception_ptr failure = record->frame.promise().failure;
    if (failure) {
        record->done.set_exception(failure);
    } else {
        record->done.set_value();
    }
    {
        std::lock_guard<std::mutex> lk(mutex_);
        if (failure) failures_.emplace_back(failure, record->done.token());
        --pending_;
        ++activity_epoch_;
        if (pending_ == 0) idle_cv_.notify_all();
    }
}

std::shared_ptr<TaskRecord> Scheduler::next_runnable(unsigned index) {
    if (!queues_[index].empty()) {
        auto rec = std::move(queues_[index].front());
        queues_[index].pop_front();
        return rec;
    }
    for (unsigned w = static_cast<unsigned>(queues_.size()); w-- > 0;) {
        if (w == index || queues_[w].empty()) continue;
        auto rec = std::move(queues_[w].front());
        queues_[w].pop_front();
        return rec;
    }
    return nullptr;
}

void Scheduler::worker_main(unsigned index) {
    tl_worker_scheduler = this;
    tl_worker_id = static_cast<int>(index);
    std::unique_lock<std::mutex> lk(mutex_);
    for (;;) {
        work_cv_.wait(lk, [this, index] {
            if (stopping_) return true;
            for (const auto& q : queues_)
                if (!q.empty()) return true;
            return false;
        });
        if (stopping_) break;
        auto record = next_runnable(index);
        if (!record) continue;
        ++running_;
        lk.unlock();

        TaskRecord* raw = record.get();
        bool first_run = !raw->started;
        raw->started = true;
        tl_current_task = raw;
        if (hooks_) {
            if (first_run) {
                hooks_->on_task_start(raw->identity.guid);
            } else {
                hooks_->on_task_resume(raw->identity.guid);
            }
        }
        tl_task_finished = false;
        raw->frame.resume();
        bool finished = tl_task_finished;
        tl_current_task = nullptr;
        if (finished) {
            raw->frame.destroy();
            raw->frame = nullptr;
        }
        record.reset();

        lk.lock();
        --running_;
    }
    tl_worker_scheduler = nullptr;
    tl_worker_id = -1;
}

std::uint64_t Scheduler::run_until_idle() {
    if (tl_worker_scheduler != nullptr) {
        throw std::logic_error("run_until_idle called from a worker thread");
    }
    using namespace std::chrono_literals;
    const std::uint64_t t0 = now_ns();
    std::vector<std::pair<std::exception_ptr, CompletionToken>> failures;
    {
        std::unique_lock<std::mutex> lk(mutex_);
        std::uint64_t last_epoch = activity_epoch_;
        std::uint64_t stalled_ms = 0;
        while (pending_ != 0) {
            idle_cv_.wait_for(lk, 50ms);
            if (pending_ == 0) break;
            if (activity_epoch_ != last_epoch) {
                last_epoch = activity_epoch_;
                stalled_ms = 0;
                continue;
            }
            bool runnable = false;
            for (const auto& q : queues_)
                if (!q.empty()) runnable = true;
            if (running_ > 0 || runnable) {
                stalled_ms = 0;
                continue;
            }
            stalled_ms += 50;
            if (stalled_ms >= config_.deadlock_timeout_ms) {
                std::vector<TaskIdentity> suspended;
                suspended.reserve(suspended_.size());
                std::ostringstream msg;
                msg << "no runnable work but " << suspended_.size()
                    << " task(s) still suspended:";
                for (const auto& [guid, identity] : suspended_) {
                    suspended.push_back(identity);
                    msg << " guid=" << guid << " name=" << identity.name << ";";
                }
                throw DeadlockError(msg.str(), std::move(suspended));
            }
        }
        failures.swap(failures_);
    }
    // A failure somebody consumed (awaited, read, blocked on) is theirs to
    // handle. One nobody ever looked at must not vanish silently.
    for (const auto& [ep, token] : failures) {
        if (!token->observed()) std::rethrow_exception(ep);
    }
    return now_ns() - t0;
}

void Scheduler::stop() {
    {
        std::lock_guard<std::mutex> lk(mutex_);
        stopping_ = true;
        work_cv_.notify_all();
        idle_cv_.notify_all();
    }
    for (auto& t : workers_) {
        if (t.joinable()) t.join();
    }
}

std::map<std::string, std::uint64_t> Scheduler::spawn_counts() const {
    std::lock_guard<std::mutex> lk(mutex_);
    return spawn_counts_;
}

TaskIdentity Scheduler::current_identity() {
    if (tl_current_task != nullptr) return tl_current_task->identity;
    TaskIdentity root;
    root.guid = kRootGuid;
    root.parent_guid = kRootGuid;
    root.locality = -1;
    return root;
}

int Scheduler::current_worker_id() { return tl_worker_id; }

}  // namespace taskscope

// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "taskscope/identity.hpp"

namespace taskscope {

// Lifecycle observer the scheduler drives. All five callbacks may fire
// concurrently from any worker; implementations must be thread-safe and must
// never throw back into the runtime.
class LifecycleHooks {
public:
    virtual ~LifecycleHooks() = default;
    virtual void on_task_create(const TaskIdentity& identity) = 0;
    virtual void on_task_start(Guid guid) = 0;
    virtual void on_task_yield(Guid guid) = 0;
    virtual void on_task_resume(Guid guid) = 0;
    virtual void on_task_stop(Guid guid) = 0;
};

}  // namespace taskscope

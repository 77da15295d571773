// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace taskscope {

using Guid = std::uint64_t;

// Guid 0 names the implicit root: top-level tasks are parented under it so
// that every task sits in one dependency forest.
inline constexpr Guid kRootGuid = 0;

// Tasks spawned without an annotation aggregate under this bucket.
inline constexpr const char* kUnnamedTask = "unnamed-task";

// Identity of one task instance: the unit of the dependency chain.
// Guids are unique within a locality run and strictly increase in spawn order.
struct TaskIdentity {
    Guid guid = 0;
    std::string name;
    Guid parent_guid = kRootGuid;
    std::int32_t locality = 0;
};

}  // namespace taskscope

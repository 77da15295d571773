// Copyright (c) 2026, the taskscope developers.
// SPDX-License-Identifier: Apache-2.0

#include "taskscope/clock.hpp"

namespace taskscope {

RunClock& RunClock::instance() {
    static RunClock clock;
    return clock;
}

}  // namespace taskscope

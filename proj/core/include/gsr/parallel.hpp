/* SPDX-FileCopyrightText: 2026 gsrestore contributors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace gsr {

// Global worker count. 1 forces fully serial execution (--threads 1).
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over disjoint chunks of [0, n). Chunk boundaries are a
// fixed function of n alone, so per-chunk results (and any per-chunk partial
// buffers reduced in chunk order) are bitwise identical for every thread
// count, including 1.
void parallel_chunks(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

// Elementwise parallel loop: fn(i) for i in [0, n). Each index is computed
// exactly once with no cross-index reduction, so results never depend on the
// thread count.
inline void parallel_for(int64_t n, const std::function<void(int64_t)>& fn) {
    parallel_chunks(n, [&](int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace gsr

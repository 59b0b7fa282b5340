#pragma once

#include <cstdint>
#include <functional>

namespace kmte {

// Runs body(i) for i in [0, count) on an OpenMP worker pool. threads <= 0
// uses the OpenMP default; threads == 1 degenerates to a plain loop. The
// first exception thrown by any iteration is rethrown after the loop; other
// iterations already running are allowed to finish.
//
// Correctness contract for callers: each iteration may only write to state
// indexed by its own i, so the result is identical whichever threads execute
// which iterations. serial_for is the reference driver kept for testing that
// contract and for the benchmark target.
void parallel_for(std::int64_t count, int threads, const std::function<void(std::int64_t)>& body);

void serial_for(std::int64_t count, const std::function<void(std::int64_t)>& body);

int hardware_threads();

}  // namespace kmte

#pragma once

#include <cstdint>
#include <functional>

namespace shear {

// Process-wide cap on worker threads. 1 (the default) means fully serial.
void set_max_threads(int n);
int max_threads();

// Runs fn(i) for i in [0, count). Work items must write only to their own
// output slot; reductions over the results happen afterwards in index order,
// so the observable result never depends on the schedule.
void parallel_for_index(int64_t count, const std::function<void(int64_t)>& fn);

} // namespace shear

#include "shear/threading.hpp"

#include <thread>
#include <vector>

namespace shear {

namespace {
int g_max_threads = 1;
// Nested parallel regions run serially so worker count stays capped.
thread_local bool g_in_parallel_region = false;
}

void set_max_threads(int n) {
    g_max_threads = n < 1 ? 1 : n;
}

int max_threads() {
    return g_max_threads;
}

void parallel_for_index(int64_t count, const std::function<void(int64_t)>& fn) {
    if (count <= 0) {
        return;
    }
    int n_threads = g_in_parallel_region ? 1 : g_max_threads;
    if (static_cast<int64_t>(n_threads) > count) {
        n_threads = static_cast<int>(count);
    }
    if (n_threads <= 1) {
        for (int64_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }

    int64_t chunk = count / n_threads;
    int64_t rem = count % n_threads;
    std::vector<std::thread> workers;
    workers.reserve(static_cast<size_t>(n_threads) - 1);
    int64_t begin = 0;
    for (int t = 0; t < n_threads; ++t) {
        int64_t end = begin + chunk + (t < rem ? 1 : 0);
        if (t == n_threads - 1) {
            g_in_parallel_region = true;
            for (int64_t i = begin; i < end; ++i) {
                fn(i);
            }
            g_in_parallel_region = false;
        } else {
            workers.emplace_back([&fn, begin, end] {
                g_in_parallel_region = true;
                for (int64_t i = begin; i < end; ++i) {
                    fn(i);
                }
            });
        }
        begin = end;
    }
    for (auto& w : workers) {
        w.join();
    }
}

} // namespace shear

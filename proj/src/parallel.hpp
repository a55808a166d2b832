#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace truncprod::detail {

// Static work-stealing-free parallel loop; results must be written to
// preassigned slots so the reduction stays deterministic.
inline void parallel_for(int nitems, int threads, const std::function<void(int)>& body) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || nitems <= 1) {
        for (int i = 0; i < nitems; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= nitems) return;
            body(i);
        }
    };
    std::vector<std::thread> pool;
    int nt = std::min(threads, nitems);
    pool.reserve(nt);
    for (int t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

} // namespace truncprod::detail

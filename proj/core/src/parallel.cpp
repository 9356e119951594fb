#include "mfgcn/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mfgcn {
namespace {
std::atomic<std::size_t> g_workers{1};
thread_local bool t_in_parallel = false;

struct ParallelScope {
    bool saved;
    ParallelScope() : saved(t_in_parallel) { t_in_parallel = true; }
    ~ParallelScope() { t_in_parallel = saved; }
};
}  // namespace

std::size_t worker_count() { return g_workers.load(); }

void set_worker_count(std::size_t n) { g_workers.store(std::max<std::size_t>(1, n)); }

void parallel_chunks(std::size_t n_items,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body,
                     std::size_t chunk) {
    const std::size_t n_chunks = chunk_count(n_items, chunk);
    if (n_chunks == 0) return;
    // Nested calls run serially on the calling worker.
    const std::size_t n_threads = t_in_parallel ? 1 : std::min(worker_count(), n_chunks);

    auto run = [&](std::size_t c) {
        const std::size_t begin = c * chunk;
        body(c, begin, std::min(n_items, begin + chunk));
    };

    if (n_threads <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) run(c);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        const ParallelScope scope;
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                run(c);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n_chunks);
                return;
            }
        }
    };

    std::vector<std::jthread> pool;
    pool.reserve(n_threads - 1);
    for (std::size_t i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace mfgcn

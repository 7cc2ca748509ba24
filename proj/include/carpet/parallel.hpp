#pragma once

// Fixed-size chunking so that results never depend on the worker count.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace carpet {

/// CARPET_THREADS if set and positive, else the hardware concurrency.
int default_threads();

inline constexpr std::size_t kChunk = 256;

/// Runs f(chunk_index, begin, end) over [0, n) split into chunks of `chunk`
/// items and returns the per-chunk results in chunk order.
template <class R, class F>
std::vector<R> map_chunks(std::size_t n, std::size_t chunk, int threads, F&& f) {
    std::size_t n_chunks = chunk == 0 ? 0 : (n + chunk - 1) / chunk;
    std::vector<R> out(n_chunks);
    if (n_chunks == 0) return out;
    std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, n_chunks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto work = [&] {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= n_chunks) return;
            try {
                out[c] = f(c, c * chunk, std::min(n, (c + 1) * chunk));
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error) error = std::current_exception();
                next = n_chunks;
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

}  // namespace carpet

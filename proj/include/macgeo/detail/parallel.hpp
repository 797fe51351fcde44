#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace macgeo::detail {

inline unsigned worker_count(unsigned requested, std::size_t n_chunks)
{
    const unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(t, n_chunks)));
}

/// Runs f(worker, chunk) for every chunk, chunks dealt round-robin to
/// `workers` threads.  Results must not depend on which worker ran a chunk.
template <class F>
void for_each_chunk(std::size_t n_chunks, unsigned workers, F&& f)
{
    auto run = [&](unsigned w) {
        for (std::size_t c = w; c < n_chunks; c += workers)
            f(w, c);
    };
    if (workers <= 1) {
        run(0);
        return;
    }
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back(run, w);
}

} // namespace macgeo::detail

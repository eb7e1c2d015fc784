// Fixed-size worker pool plus a contiguous-partition parallel_for used by
// the reader, writer, gather and sort stages.

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <future>
#include <mutex>
#include <thread>
#include <vector>

namespace braidsort {

class ThreadPool {
public:
    explicit ThreadPool(unsigned num_threads);
    ~ThreadPool();

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    unsigned size() const { return static_cast<unsigned>(threads_.size()); }

    std::future<void> submit(std::function<void()> fn);

private:
    void worker_loop();

    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::packaged_task<void()>> queue_;
    std::vector<std::thread> threads_;
    bool stop_ = false;
};

/**
 * Split [0, count) into at most pool.size() near-equal contiguous parts and
 * run fn(part_index, begin, end) on the pool. Blocks until every part is
 * done; the first exception thrown by a part is rethrown.
 *
 * With count <= 1 part or an empty range the call runs inline.
 */
void parallel_for(ThreadPool& pool, uint64_t count,
                  const std::function<void(unsigned, uint64_t, uint64_t)>& fn);

/** As above, but runs inline on the calling thread when pool is null. */
void parallel_for(ThreadPool* pool, uint64_t count,
                  const std::function<void(unsigned, uint64_t, uint64_t)>& fn);

/** Partition boundary helper: start of part i when splitting count into parts. */
inline uint64_t partition_start(uint64_t count, unsigned parts, unsigned i) {
    return count * i / parts;
}

} // namespace braidsort

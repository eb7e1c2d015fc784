#include "thread_pool.hpp"

#include <algorithm>

namespace braidsort {

ThreadPool::ThreadPool(unsigned num_threads) {
    if (num_threads == 0) {
        num_threads = 1;
    }
    threads_.reserve(num_threads);
    for (unsigned i = 0; i < num_threads; i++) {
        threads_.emplace_back(&ThreadPool::worker_loop, this);
    }
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lock(mu_);
        stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) {
        t.join();
    }
}

std::future<void> ThreadPool::submit(std::function<void()> fn) {
    std::packaged_task<void()> task(std::move(fn));
    auto fut = task.get_future();
    {
        std::lock_guard<std::mutex> lock(mu_);
        queue_.push_back(std::move(task));
    }
    cv_.notify_one();
    return fut;
}

void ThreadPool::worker_loop() {
    while (true) {
        std::packaged_task<void()> task;
        {
            std::unique_lock<std::mutex> lock(mu_);
            cv_.wait(lock, [&] { return stop_ || !queue_.empty(); });
            if (queue_.empty()) {
                return;
            }
            task = std::move(queue_.front());
            queue_.pop_front();
        }
        task();
    }
}

void parallel_for(ThreadPool* pool, uint64_t count,
                  const std::function<void(unsigned, uint64_t, uint64_t)>& fn) {
    if (pool == nullptr) {
        if (count > 0) {
            fn(0, 0, count);
        }
        return;
    }
    parallel_for(*pool, count, fn);
}

void parallel_for(ThreadPool& pool, uint64_t count,
                  const std::function<void(unsigned, uint64_t, uint64_t)>& fn) {
    if (count == 0) {
        return;
    }
    unsigned parts = std::min<uint64_t>(pool.size(), count);
    if (parts <= 1) {
        fn(0, 0, count);
        return;
    }
    std::vector<std::future<void>> futures;
    futures.reserve(parts);
    for (unsigned i = 0; i < parts; i++) {
        uint64_t begin = partition_start(count, parts, i);
        uint64_t end = partition_start(count, parts, i + 1);
        futures.push_back(pool.submit([&fn, i, begin, end] { fn(i, begin, end); }));
    }
    for (auto& f : futures) {
        f.get();
    }
}

} // namespace braidsort

#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace splatcap {

// Fixed pool with static range partitioning. Each index is processed by
// exactly one worker with a deterministic split, so results do not depend
// on scheduling. SPLATCAP_THREADS overrides the worker count.
class ThreadPool {
  public:
    static ThreadPool& instance();

    // fn(begin, end) on disjoint chunks; blocks until all complete.
    void parallel_for(std::size_t begin, std::size_t end,
                      const std::function<void(std::size_t, std::size_t)>& fn,
                      std::size_t min_grain = 256);

    int num_threads() const { return static_cast<int>(workers_.size()) + 1; }

    ~ThreadPool();

  private:
    ThreadPool();
    void worker_loop(int idx);

    struct Job {
        const std::function<void(std::size_t, std::size_t)>* fn = nullptr;
        std::vector<std::pair<std::size_t, std::size_t>> chunks;
        std::size_t next = 0;  // chunk cursor for workers
        std::size_t done = 0;
        int generation = 0;
    };

    std::vector<std::thread> workers_;
    std::mutex mu_;
    std::condition_variable cv_work_;
    std::condition_variable cv_done_;
    Job job_;
    int generation_ = 0;
    bool stop_ = false;
};

}  // namespace splatcap

#include "splatcap/threading.hpp"

#include <algorithm>
#include <cstdlib>

namespace splatcap {

ThreadPool& ThreadPool::instance() {
    static ThreadPool pool;
    return pool;
}

ThreadPool::ThreadPool() {
    unsigned n = std::thread::hardware_concurrency();
    if (const char* env = std::getenv("SPLATCAP_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v <= 256) n = static_cast<unsigned>(v);
    }
    if (n == 0) n = 1;
    for (unsigned i = 1; i < n; ++i) workers_.emplace_back([this, i] { worker_loop(static_cast<int>(i)); });
}

ThreadPool::~ThreadPool() {
    {
        std::lock_guard<std::mutex> lk(mu_);
        stop_ = true;
    }
    cv_work_.notify_all();
    for (auto& w : workers_) w.join();
}

void ThreadPool::worker_loop(int) {
    int seen = 0;
    for (;;) {
        std::unique_lock<std::mutex> lk(mu_);
        cv_work_.wait(lk, [&] { return stop_ || job_.generation != seen; });
        if (stop_) return;
        seen = job_.generation;
        while (job_.next < job_.chunks.size()) {
            auto chunk = job_.chunks[job_.next++];
            lk.unlock();
            (*job_.fn)(chunk.first, chunk.second);
            lk.lock();
            ++job_.done;
        }
        if (job_.done == job_.chunks.size()) cv_done_.notify_all();
    }
}

void ThreadPool::parallel_for(std::size_t begin, std::size_t end,
                              const std::function<void(std::size_t, std::size_t)>& fn,
                              std::size_t min_grain) {
    if (end <= begin) return;
    std::size_t n = end - begin;
    std::size_t nthreads = static_cast<std::size_t>(num_threads());
    if (nthreads == 1 || n <= min_grain) {
        fn(begin, end);
        return;
    }
    std::size_t nchunks = std::min(nthreads * 4, std::max<std::size_t>(1, n / std::max<std::size_t>(1, min_grain / 4)));
    nchunks = std::min(nchunks, n);
    std::size_t chunk = (n + nchunks - 1) / nchunks;

    std::vector<std::pair<std::size_t, std::size_t>> chunks;
    for (std::size_t s = begin; s < end; s += chunk) chunks.emplace_back(s, std::min(s + chunk, end));

    {
        std::lock_guard<std::mutex> lk(mu_);
        job_.fn = &fn;
        job_.chunks = std::move(chunks);
        job_.next = 0;
        job_.done = 0;
        job_.generation = ++generation_;
    }
    cv_work_.notify_all();

    // participate
    for (;;) {
        std::unique_lock<std::mutex> lk(mu_);
        if (job_.next < job_.chunks.size()) {
            auto c = job_.chunks[job_.next++];
            lk.unlock();
            fn(c.first, c.second);
            lk.lock();
            ++job_.done;
        }
        if (job_.done == job_.chunks.size()) break;
        if (job_.next >= job_.chunks.size()) {
            cv_done_.wait(lk, [&] { return job_.done == job_.chunks.size(); });
            break;
        }
    }
}

}  // namespace splatcap

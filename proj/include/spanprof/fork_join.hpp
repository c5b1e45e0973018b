#pragma once

#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace spanprof {

// Small work-stealing pool. Each worker owns a deque: it pops its own work
// LIFO and steals FIFO from the others. Threads outside the pool submit to a
// shared injection queue and may help while waiting.
class ForkJoinPool {
public:
    using Job = std::function<void()>;

    explicit ForkJoinPool(std::size_t workers);
    ~ForkJoinPool();

    ForkJoinPool(const ForkJoinPool&) = delete;
    ForkJoinPool& operator=(const ForkJoinPool&) = delete;

    std::size_t worker_count() const noexcept { return workers_.size(); }

    // Queue a job on the calling worker's deque, or on the injection queue
    // when called from outside the pool.
    void fork(Job job);

    // Run queued jobs on the calling thread until `done()` holds.
    void help_until(const std::function<bool()>& done);

    // Blocks until no job is queued or running.
    void quiesce();

    // Runs `fn` once on every worker thread and waits for all of them.
    // Call from outside the pool.
    void broadcast(const std::function<void()>& fn);

    // Index of the calling worker, or -1 outside the pool.
    static int current_worker_index() noexcept;

private:
    struct Worker {
        std::mutex mutex;
        std::deque<Job> jobs;
        // Jobs only this worker may run.
        std::deque<Job> pinned;
        std::thread thread;
    };

    bool try_run_one(int self);
    bool pop_pinned(int self, Job& out);
    bool pop_local(int self, Job& out);
    bool steal(int self, Job& out);
    void worker_loop(int index);
    void run(Job& job);

    std::vector<std::unique_ptr<Worker>> workers_;
    std::mutex inject_mutex_;
    std::deque<Job> injected_;

    std::mutex sleep_mutex_;
    std::condition_variable wake_;
    std::condition_variable idle_;
    std::atomic<std::size_t> queued_{0};
    std::atomic<std::size_t> running_{0};
    std::atomic<bool> stopping_{false};
    std::uint64_t pool_id_;
};

}  // namespace spanprof

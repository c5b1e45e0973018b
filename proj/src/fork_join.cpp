#include "spanprof/fork_join.hpp"

#include <chrono>
#include <latch>

namespace spanprof {

namespace {

std::atomic<std::uint64_t> g_pool_ids{1};

struct WorkerIdentity {
    std::uint64_t pool = 0;
    int index = -1;
};

thread_local WorkerIdentity t_identity;

}  // namespace

ForkJoinPool::ForkJoinPool(std::size_t workers) : pool_id_(g_pool_ids.fetch_add(1)) {
    if (workers == 0) workers = 1;
    workers_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) workers_.push_back(std::make_unique<Worker>());
    for (std::size_t i = 0; i < workers; ++i) {
        workers_[i]->thread = std::thread([this, i] { worker_loop(static_cast<int>(i)); });
    }
}

ForkJoinPool::~ForkJoinPool() {
    quiesce();
    {
        std::lock_guard lock(sleep_mutex_);
        stopping_.store(true);
    }
    wake_.notify_all();
    for (auto& w : workers_) w->thread.join();
}

int ForkJoinPool::current_worker_index() noexcept { return t_identity.index; }

void ForkJoinPool::fork(Job job) {
    const int self = t_identity.pool == pool_id_ ? t_identity.index : -1;
    if (self >= 0) {
        std::lock_guard lock(workers_[static_cast<std::size_t>(self)]->mutex);
        workers_[static_cast<std::size_t>(self)]->jobs.push_back(std::move(job));
    } else {
        std::lock_guard lock(inject_mutex_);
        injected_.push_back(std::move(job));
    }
    queued_.fetch_add(1);
    {
        std::lock_guard lock(sleep_mutex_);
    }
    wake_.notify_one();
}

bool ForkJoinPool::pop_pinned(int self, Job& out) {
    if (self < 0) return false;
    auto& w = *workers_[static_cast<std::size_t>(self)];
    std::lock_guard lock(w.mutex);
    if (w.pinned.empty()) return false;
    out = std::move(w.pinned.front());
    w.pinned.pop_front();
    running_.fetch_add(1);
    queued_.fetch_sub(1);
    return true;
}

bool ForkJoinPool::pop_local(int self, Job& out) {
    if (self < 0) return false;
    auto& w = *workers_[static_cast<std::size_t>(self)];
    std::lock_guard lock(w.mutex);
    if (w.jobs.empty()) return false;
    out = std::move(w.jobs.back());
    w.jobs.pop_back();
    running_.fetch_add(1);
    queued_.fetch_sub(1);
    return true;
}

bool ForkJoinPool::steal(int self, Job& out) {
    const auto n = workers_.size();
    const std::size_t first = self >= 0 ? static_cast<std::size_t>(self) + 1 : 0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto victim = (first + k) % n;
        if (static_cast<int>(victim) == self) continue;
        auto& w = *workers_[victim];
        std::lock_guard lock(w.mutex);
        if (w.jobs.empty()) continue;
        out = std::move(w.jobs.front());
        w.jobs.pop_front();
        running_.fetch_add(1);
        queued_.fetch_sub(1);
        return true;
    }
    std::lock_guard lock(inject_mutex_);
    if (injected_.empty()) return false;
    out = std::move(injected_.front());
    injected_.pop_front();
    running_.fetch_add(1);
    queued_.fetch_sub(1);
    return true;
}

void ForkJoinPool::run(Job& job) {
    job();
    job = nullptr;
    running_.fetch_sub(1);
    idle_.notify_all();
}

bool ForkJoinPool::try_run_one(int self) {
    Job job;
    if (pop_pinned(self, job) || pop_local(self, job) || steal(self, job)) {
        run(job);
        return true;
    }
    return false;
}

void ForkJoinPool::worker_loop(int index) {
    t_identity = {pool_id_, index};
    while (true) {
        if (try_run_one(index)) continue;
        if (queued_.load() > 0) {
            // Whatever is queued is pinned to another worker.
            std::this_thread::yield();
            continue;
        }
        std::unique_lock lock(sleep_mutex_);
        wake_.wait(lock, [this] { return stopping_.load() || queued_.load() > 0; });
        if (stopping_.load() && queued_.load() == 0) return;
    }
}

void ForkJoinPool::help_until(const std::function<bool()>& done) {
    const int self = t_identity.pool == pool_id_ ? t_identity.index : -1;
    int idle_rounds = 0;
    while (!done()) {
        if (try_run_one(self)) {
            idle_rounds = 0;
            continue;
        }
        if (++idle_rounds < 64) {
            std::this_thread::yield();
            continue;
        }
        std::unique_lock lock(sleep_mutex_);
        idle_.wait_for(lock, std::chrono::microseconds(200));
    }
}

void ForkJoinPool::broadcast(const std::function<void()>& fn) {
    std::latch done(static_cast<std::ptrdiff_t>(workers_.size()));
    for (auto& w : workers_) {
        {
            std::lock_guard lock(w->mutex);
            w->pinned.push_back([&] {
                fn();
                done.count_down();
            });
        }
        queued_.fetch_add(1);
    }
    {
        std::lock_guard lock(sleep_mutex_);
    }
    wake_.notify_all();
    done.wait();
}

void ForkJoinPool::quiesce() {
    help_until([this] { return queued_.load() == 0 && running_.load() == 0; });
}

}  // namespace spanprof

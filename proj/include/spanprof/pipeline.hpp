#pragma once

// Terminal-operation adapters. Passing a null probe runs the same code path
// without instrumentation, which is how baselines are measured.

#include "spanprof/fork_join.hpp"
#include "spanprof/probe.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <ranges>
#include <utility>

namespace spanprof {

template <std::ranges::input_range Range, typename Fn>
void for_each(Probe* probe, MethodId location, Range&& range, Fn&& fn) {
    auto traverse = [&] {
        for (auto&& element : range) fn(element);
    };
    if (probe != nullptr) {
        profile_sequential(*probe, location, traverse);
    } else {
        traverse();
    }
}

template <std::ranges::input_range Range, typename T, typename Op>
T fold(Probe* probe, MethodId location, Range&& range, T init, Op&& op) {
    auto traverse = [&] {
        for (auto&& element : range) init = op(std::move(init), element);
        return init;
    };
    if (probe != nullptr) return profile_sequential(*probe, location, traverse);
    return traverse();
}

namespace detail {

template <typename Leaf>
struct ParallelRun {
    ParallelRun(ForkJoinPool& p, Probe* pr, MethodId loc, std::size_t g, Leaf& l)
        : pool(p), probe(pr), location(loc), grain(g), leaf(l) {}

    ForkJoinPool& pool;
    Probe* probe;
    MethodId location;
    std::size_t grain;
    Leaf& leaf;
    PipelineHandle handle{true};
    std::atomic<std::size_t> pending{0};
    std::mutex error_mutex;
    std::exception_ptr error;

    void record_error() {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
    }

    // One task execution: split off and fork right halves until the range is
    // at most `grain` long, then process what is left. Completion is counted
    // rather than joined, so a task's span never waits on its children.
    void execute(std::size_t lo, std::size_t hi) {
        auto body = [&] {
            while (hi - lo > grain) {
                const std::size_t mid = lo + (hi - lo) / 2;
                pending.fetch_add(1, std::memory_order_relaxed);
                pool.fork([this, mid, hi] {
                    try {
                        execute(mid, hi);
                    } catch (...) {
                        record_error();
                    }
                    pending.fetch_sub(1, std::memory_order_acq_rel);
                });
                hi = mid;
            }
            leaf(lo, hi);
        };
        if (probe != nullptr) {
            profile_parallel_task(*probe, handle, location, body);
        } else {
            body();
        }
    }
};

}  // namespace detail

// Parallel traversal of [0, n): `leaf(lo, hi)` is called once per task on
// whichever worker runs it. The root task runs on the calling thread, which
// then helps the pool until every forked task has finished.
template <typename Leaf>
void parallel_for(ForkJoinPool& pool, Probe* probe, MethodId location, std::size_t n, std::size_t grain, Leaf&& leaf) {
    if (grain == 0) grain = 1;
    detail::ParallelRun<std::remove_reference_t<Leaf>> run(pool, probe, location, grain, leaf);
    try {
        run.execute(0, n);
    } catch (...) {
        run.record_error();
    }
    pool.help_until([&] { return run.pending.load(std::memory_order_acquire) == 0; });
    if (run.error) std::rethrow_exception(run.error);
}

}  // namespace spanprof

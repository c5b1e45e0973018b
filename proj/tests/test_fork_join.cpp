#include "spanprof/fork_join.hpp"
#include "spanprof/pipeline.hpp"
#include "spanprof/reconstruction.hpp"

#include <doctest.h>

#include <numeric>
#include <set>
#include <stdexcept>

using namespace spanprof;

TEST_SUITE("fork_join") {
    TEST_CASE("parallel_for covers every index exactly once") {
        ForkJoinPool pool(4);
        for (std::size_t n : {0u, 1u, 7u, 1000u}) {
            for (std::size_t grain : {1u, 3u, 64u}) {
                std::vector<std::atomic<int>> hits(n);
                parallel_for(pool, nullptr, 0, n, grain, [&](std::size_t lo, std::size_t hi) {
                    CHECK(hi - lo <= grain);
                    for (auto i = lo; i < hi; ++i) hits[i].fetch_add(1);
                });
                for (auto& h : hits) CHECK(h.load() == 1);
            }
        }
    }

    TEST_CASE("32 leaves at grain 1 make one primordial and 31 support spans") {
        ForkJoinPool pool(4);
        MonotonicClockSource src;
        Recorder rec(src);
        Probe probe(rec);
        parallel_for(pool, &probe, 3, 32, 1, [](std::size_t, std::size_t) {});
        const auto profile = build_application_profile(rec.snapshot());
        REQUIRE(profile.merged_named_spans.size() == 1);
        const auto& bucket = profile.merged_named_spans.begin()->second;
        CHECK(bucket.size() == 32);
        int prim = 0, supp = 0;
        for (auto i : bucket) {
            (profile.all_spans[i].is_primordial ? prim : supp) += 1;
            CHECK(profile.all_spans[i].method_id == 3);
        }
        CHECK(prim == 1);
        CHECK(supp == 31);
        CHECK(profile.incomplete_spans.empty());
    }

    TEST_CASE("exceptions in leaves reach the caller") {
        ForkJoinPool pool(3);
        CHECK_THROWS_AS(parallel_for(pool, nullptr, 0, 100, 1,
                                     [](std::size_t lo, std::size_t) {
                                         if (lo == 77) throw std::runtime_error("leaf");
                                     }),
                        std::runtime_error);
        std::atomic<int> after{0};
        parallel_for(pool, nullptr, 0, 10, 1, [&](std::size_t, std::size_t) { after.fetch_add(1); });
        CHECK(after.load() == 10);
    }

    TEST_CASE("broadcast runs once on every worker") {
        ForkJoinPool pool(5);
        std::mutex m;
        std::multiset<int> seen;
        for (int round = 0; round < 20; ++round) {
            seen.clear();
            pool.broadcast([&] {
                std::lock_guard lock(m);
                seen.insert(ForkJoinPool::current_worker_index());
            });
            REQUIRE(seen.size() == 5);
            for (int w = 0; w < 5; ++w) CHECK(seen.count(w) == 1);
        }
    }

    TEST_CASE("sequential adapters") {
        MonotonicClockSource src;
        Recorder rec(src);
        Probe probe(rec);
        std::vector<int> v(10);
        std::iota(v.begin(), v.end(), 1);
        CHECK(fold(&probe, 0, v, 0, [](int a, int b) { return a + b; }) == 55);
        int sum = 0;
        for_each(nullptr, 0, v, [&](int x) { sum += x; });
        CHECK(sum == 55);
        CHECK(rec.drain_local().size() == 2);
    }

    TEST_CASE("outside threads are -1") {
        CHECK(ForkJoinPool::current_worker_index() == -1);
    }
}

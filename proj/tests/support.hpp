#pragma once

// Test fixtures shared by the unit suites and the acceptance runner:
// temporary directories, random trace generators and brute-force oracles
// that do not reuse any of the library's reconstruction logic.

#include "spanprof/reconstruction.hpp"
#include "spanprof/trace_format.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace spanprof::test {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("spanprof-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline std::uint64_t log_uniform(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
    std::uniform_real_distribution<double> u(std::log(static_cast<double>(lo)), std::log(static_cast<double>(hi)));
    return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::llround(std::exp(u(rng)))), lo, hi);
}

struct TraceShape {
    std::size_t max_events = 10'000;
    std::size_t min_events = 2;
    double named_fraction = 0.3;
    int streams = 5;
    std::uint32_t methods = 8;
    std::uint64_t max_gap = 1000;
    std::size_t max_depth = 64;
};

// Balanced single-thread trace with strictly increasing cycles and an even
// event count drawn log-uniformly from [min_events, max_events].
inline std::vector<SpanEvent> random_trace(std::mt19937_64& rng, const TraceShape& shape = {}) {
    const auto target = log_uniform(rng, std::max<std::uint64_t>(shape.min_events, 2), shape.max_events) & ~1ULL;
    const std::size_t spans = target / 2;
    std::uniform_int_distribution<std::uint64_t> gap(1, shape.max_gap);
    std::uniform_int_distribution<std::uint32_t> method(0, shape.methods - 1);
    std::uniform_int_distribution<int> stream(0, shape.streams - 1);
    std::bernoulli_distribution named(shape.named_fraction);
    std::bernoulli_distribution primordial(0.2);
    std::bernoulli_distribution close(0.5);

    std::vector<SpanEvent> events;
    events.reserve(spans * 2);
    std::uint64_t now = gap(rng);
    std::size_t opened = 0, depth = 0;
    while (opened < spans || depth > 0) {
        const bool must_close = opened == spans || depth >= shape.max_depth;
        if (depth > 0 && (must_close || close(rng))) {
            events.push_back(SpanEvent::end(now));
            --depth;
        } else {
            if (named(rng)) {
                const StreamId s = stream(rng);
                events.push_back(primordial(rng) ? SpanEvent::primordial_begin(now, method(rng), s)
                                                 : SpanEvent::support_begin(now, method(rng), s));
            } else {
                events.push_back(SpanEvent::anonymous_begin(now, method(rng)));
            }
            ++opened;
            ++depth;
        }
        now += gap(rng);
    }
    return events;
}

// Brute-force view of one span: its interval comes from a forward scan for
// the matching end, its parent is the smallest strictly enclosing interval.
struct OracleSpan {
    std::uint64_t begin = 0;
    std::uint64_t end = 0;
    EventType type = EventType::ASB;
    StreamId stream = kAnonymousStream;
    MethodId method = 0;
    std::optional<std::size_t> parent;  // index into the oracle list
    std::uint64_t nested_cycles = 0;
    std::uint32_t n_anon = 0, n_prim = 0, n_supp = 0;
};

inline std::vector<OracleSpan> containment_oracle(const std::vector<SpanEvent>& events) {
    std::vector<OracleSpan> spans;
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (!events[i].is_begin()) continue;
        int balance = 0;
        for (std::size_t j = i; j < events.size(); ++j) {
            balance += events[j].is_begin() ? 1 : -1;
            if (balance == 0) {
                OracleSpan s;
                s.begin = events[i].cycles;
                s.end = events[j].cycles;
                s.type = events[i].type;
                s.stream = events[i].stream_id;
                s.method = events[i].method_id;
                spans.push_back(s);
                break;
            }
        }
    }
    for (std::size_t i = 0; i < spans.size(); ++i) {
        std::uint64_t best = UINT64_MAX;
        for (std::size_t j = 0; j < spans.size(); ++j) {
            if (i == j) continue;
            if (spans[j].begin < spans[i].begin && spans[i].end < spans[j].end) {
                const auto len = spans[j].end - spans[j].begin;
                if (len < best) {
                    best = len;
                    spans[i].parent = j;
                }
            }
        }
    }
    for (const auto& s : spans) {
        if (!s.parent) continue;
        auto& p = spans[*s.parent];
        p.nested_cycles += s.end - s.begin;
        if (s.type == EventType::ASB) ++p.n_anon;
        else if (s.type == EventType::PSB) ++p.n_prim;
        else ++p.n_supp;
    }
    return spans;
}

// Span-for-span comparison; returns an empty string on equality.
inline std::string compare_with_oracle(const ThreadProfile& got, const std::vector<OracleSpan>& want) {
    if (got.spans.size() != want.size()) {
        return "span count " + std::to_string(got.spans.size()) + " vs " + std::to_string(want.size());
    }
    std::vector<std::size_t> order(want.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return want[a].begin < want[b].begin; });
    std::vector<std::size_t> got_order(got.spans.size());
    for (std::size_t i = 0; i < got_order.size(); ++i) got_order[i] = i;
    std::sort(got_order.begin(), got_order.end(),
              [&](auto a, auto b) { return got.spans[a].cycles_begin < got.spans[b].cycles_begin; });

    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& w = want[order[k]];
        const auto& g = got.spans[got_order[k]];
        const auto where = "span beginning at " + std::to_string(w.begin) + ": ";
        if (g.cycles_begin != w.begin || g.cycles_end != w.end) return where + "interval differs";
        if (g.measured_cycles() != w.end - w.begin) return where + "measured cycles differ";
        if (g.nested_cycles != w.nested_cycles) return where + "nested cycles differ";
        if (g.nested_anonymous_spans != w.n_anon || g.nested_primordial_spans != w.n_prim ||
            g.nested_support_spans != w.n_supp) {
            return where + "nested counters differ";
        }
        if (g.method_id != w.method) return where + "method differs";
        const bool named = w.type != EventType::ASB;
        if (g.is_named() != named || (named && g.stream_id != w.stream)) return where + "stream differs";
        if (g.is_primordial != (w.type == EventType::PSB)) return where + "kind differs";
        if (g.parent.has_value() != w.parent.has_value()) return where + "parent presence differs";
        if (g.parent && got.spans[*g.parent].cycles_begin != want[*w.parent].begin) return where + "parent differs";
    }
    return {};
}

// Correctly rounded sum through a wide binary float (exact for the magnitudes used in tests).
inline double wide_sum(const std::vector<double>& values) {
    using Wide = boost::multiprecision::number<
        boost::multiprecision::cpp_bin_float<2200, boost::multiprecision::digit_base_2>>;
    Wide total = 0;
    for (double v : values) total += Wide(v);
    return total.convert_to<double>();
}

// Independent compensation formula used by oracles.
inline double oracle_compensated(const Span& s, double ic, double oa, double op, double os) {
    const double raw = static_cast<double>(s.cycles_end - s.cycles_begin - s.nested_cycles) -
                       s.nested_anonymous_spans * oa - s.nested_primordial_spans * op -
                       s.nested_support_spans * os - ic;
    return raw < 0.0 ? 0.0 : raw;
}

// Several threads; each stream gets exactly one primordial span (on a
// random thread), its other spans are supports spread over the threads.
inline std::vector<ThreadProfile> random_profile_threads(std::mt19937_64& rng, std::size_t threads,
                                                         std::size_t spans_per_thread, std::size_t max_depth) {
    std::uniform_int_distribution<std::uint64_t> gap(1, 5000);
    std::uniform_int_distribution<std::uint32_t> method(0, 15);
    std::bernoulli_distribution close(0.45);
    std::bernoulli_distribution named(0.3);
    const int streams = 6;
    std::uniform_int_distribution<int> stream_pick(0, streams - 1);
    std::uniform_int_distribution<std::size_t> thread_pick(0, threads - 1);
    std::vector<std::size_t> prim_thread(streams);
    for (auto& t : prim_thread) t = thread_pick(rng);
    std::vector<bool> prim_done(streams, false);

    std::vector<ThreadProfile> out;
    for (std::size_t t = 0; t < threads; ++t) {
        std::vector<SpanEvent> ev;
        std::uint64_t now = gap(rng);
        std::size_t opened = 0, depth = 0, named_open = 0;
        std::vector<bool> stack;
        while (opened < spans_per_thread || depth > 0) {
            if (depth > 0 && (opened == spans_per_thread || depth >= max_depth || close(rng))) {
                ev.push_back(SpanEvent::end(now));
                named_open -= stack.back() ? 1 : 0;
                stack.pop_back();
                --depth;
            } else {
                // A task never runs inside another task on the same thread,
                // which also keeps outer chains acyclic.
                const bool is_named = named_open == 0 && named(rng);
                stack.push_back(is_named);
                named_open += is_named ? 1 : 0;
                if (is_named) {
                    const int s = stream_pick(rng);
                    if (!prim_done[s] && prim_thread[s] == t) {
                        ev.push_back(SpanEvent::primordial_begin(now, method(rng), s));
                        prim_done[s] = true;
                    } else {
                        ev.push_back(SpanEvent::support_begin(now, method(rng), s));
                    }
                } else {
                    ev.push_back(SpanEvent::anonymous_begin(now, method(rng)));
                }
                ++opened;
                ++depth;
            }
            now += gap(rng);
        }
        out.push_back(reconstruct_thread(ev, t, "t" + std::to_string(t)));
    }
    // Streams that never got their primordial: demote them by giving them one on thread 0.
    for (int s = 0; s < streams; ++s) {
        if (prim_done[s]) continue;
        for (auto& tp : out) {
            auto it = tp.named_spans.find(s);
            if (it == tp.named_spans.end()) continue;
            tp.spans[it->second.front()].is_primordial = true;
            prim_done[s] = true;
            break;
        }
    }
    return out;
}

}  // namespace spanprof::test

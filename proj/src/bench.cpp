#include "spanprof/bench.hpp"

#include "spanprof/errors.hpp"
#include "spanprof/pipeline.hpp"
#include "spanprof/reconstruction.hpp"
#include "spanprof/recorder.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <random>
#include <ranges>

namespace spanprof {

const char* to_string(WorkloadMode mode) {
    switch (mode) {
        case WorkloadMode::Sequential: return "seq";
        case WorkloadMode::Parallel: return "par";
        case WorkloadMode::Mixed: return "mixed";
    }
    return "?";
}

const char* to_string(NestingProfile profile) {
    switch (profile) {
        case NestingProfile::Flat: return "flat";
        case NestingProfile::DeepRecursive: return "deep";
        case NestingProfile::FlatMapStyle: return "flatmap";
    }
    return "?";
}

std::optional<WorkloadMode> parse_workload_mode(const std::string& text) {
    if (text == "seq" || text == "sequential") return WorkloadMode::Sequential;
    if (text == "par" || text == "parallel") return WorkloadMode::Parallel;
    if (text == "mixed") return WorkloadMode::Mixed;
    return std::nullopt;
}

std::optional<NestingProfile> parse_nesting_profile(const std::string& text) {
    if (text == "flat") return NestingProfile::Flat;
    if (text == "deep" || text == "deep-recursive") return NestingProfile::DeepRecursive;
    if (text == "flatmap" || text == "flat-map") return NestingProfile::FlatMapStyle;
    return std::nullopt;
}

void validate(const WorkloadSpec& spec) {
    if (spec.span_count == 0) throw UsageError("span count must be at least 1");
    if (spec.depth == 0) throw UsageError("depth must be at least 1");
    if (spec.workers == 0) throw UsageError("worker count must be at least 1");
    if (spec.skew && !(*spec.skew >= 0.0 && *spec.skew <= 1.0)) throw UsageError("skew must lie in [0, 1]");
    if (!(spec.jitter >= 0.0 && spec.jitter < 1.0)) throw UsageError("jitter must lie in [0, 1)");
}

std::vector<WorkUnit> plan_workload(const WorkloadSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const auto draw = [&]() -> std::uint64_t {
        if (spec.jitter == 0.0) return spec.target_cps;
        return static_cast<std::uint64_t>(
            std::llround(static_cast<double>(spec.target_cps) * (1.0 + spec.jitter * unit(rng))));
    };

    std::size_t per_unit = 1;
    if (spec.nesting == NestingProfile::DeepRecursive) per_unit = spec.depth;
    if (spec.nesting == NestingProfile::FlatMapStyle) per_unit = spec.depth + 1;

    std::vector<WorkUnit> units;
    for (std::size_t remaining = spec.span_count; remaining > 0;) {
        const auto n = std::min(per_unit, remaining);
        WorkUnit u;
        u.chain = spec.nesting == NestingProfile::DeepRecursive;
        for (std::size_t i = 0; i < n; ++i) u.work.push_back(draw());
        units.push_back(std::move(u));
        remaining -= n;
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        switch (spec.mode) {
            case WorkloadMode::Sequential: units[i].parallel = false; break;
            case WorkloadMode::Parallel: units[i].parallel = true; break;
            case WorkloadMode::Mixed: units[i].parallel = i % 2 == 1; break;
        }
    }

    if (spec.skew) {
        std::vector<WorkUnit*> par;
        for (auto& u : units) {
            if (u.parallel) par.push_back(&u);
        }
        if (!par.empty()) {
            double total = 0.0;
            for (const auto* u : par) total += static_cast<double>(u->work.front());
            const double even = (1.0 - *spec.skew) * total / static_cast<double>(par.size());
            for (auto* u : par) u->work.front() = static_cast<std::uint64_t>(std::llround(even));
            par.front()->work.front() = static_cast<std::uint64_t>(std::llround(*spec.skew * total + even));
        }
    }
    return units;
}

namespace {

// Two readings per participating thread: one when the thread first touches
// stream work in this iteration, one after the iteration has finished.
class BaselineMeter {
public:
    explicit BaselineMeter(CycleSource& source) : source_(source), epoch_(next_epoch()) {}

    void enter() {
        auto& st = state();
        if (st.epoch == epoch_) return;
        st.epoch = epoch_;
        st.begin = source_.read().value;
    }

    // Second reading for the calling thread, if it participated.
    void leave() {
        auto& st = state();
        if (st.epoch != epoch_) return;
        const auto end = source_.read().value;
        st.epoch = 0;
        std::lock_guard lock(mutex_);
        total_ += end - st.begin;
        ++threads_;
    }

    std::uint64_t total() const { return total_; }
    std::size_t threads() const { return threads_; }

private:
    struct State {
        std::uint64_t epoch = 0;
        std::uint64_t begin = 0;
    };

    static State& state() {
        thread_local State st;
        return st;
    }

    static std::uint64_t next_epoch() {
        static std::atomic<std::uint64_t> epochs{1};
        return epochs.fetch_add(1);
    }

    CycleSource& source_;
    std::uint64_t epoch_;
    std::mutex mutex_;
    std::uint64_t total_ = 0;
    std::size_t threads_ = 0;
};

class IterationTimer {
public:
    explicit IterationTimer(CycleSource& source) : scripted_(dynamic_cast<ScriptedCycleSource*>(&source)) {}

    void start() {
        if (scripted_ != nullptr) {
            virtual_start_ = scripted_->now();
        } else {
            wall_start_ = std::chrono::steady_clock::now();
        }
    }

    double stop() const {
        if (scripted_ != nullptr) return static_cast<double>(scripted_->now() - virtual_start_) * 1e-9;
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start_).count();
    }

private:
    ScriptedCycleSource* scripted_;
    std::uint64_t virtual_start_ = 0;
    std::chrono::steady_clock::time_point wall_start_;
};

struct Locations {
    MethodId sequential = 0;
    MethodId parallel = 0;
    MethodId nested = 0;
};

class Executor {
public:
    Executor(const WorkloadSpec& spec, CycleSource& source)
        : spec_(spec), source_(source), units_(plan_workload(spec)) {
        for (const auto& u : units_) {
            if (u.parallel) parallel_.push_back(&u);
        }
        if (!parallel_.empty()) pool_ = std::make_unique<ForkJoinPool>(spec.workers);
    }

    Locations register_locations(Recorder& recorder) const {
        const std::string base = "spanprof::bench::" + spec_.name + "::";
        Locations loc;
        loc.sequential = recorder.register_location(base + "sequential_stream");
        loc.parallel = recorder.register_location(base + "parallel_stream");
        loc.nested = recorder.register_location(base + "nested_stream");
        return loc;
    }

    // Profiled when `probe` is set, else measures the two-point baseline.
    IterationResult iterate(Probe* probe, const Locations& loc) {
        IterationResult result;
        BaselineMeter meter(source_);
        BaselineMeter* baseline = probe == nullptr ? &meter : nullptr;
        IterationTimer timer(source_);
        timer.start();

        for (const auto& u : units_) {
            if (u.parallel) continue;
            if (baseline != nullptr) baseline->enter();
            for_each(probe, loc.sequential, std::views::single(u.work.front()), [&](std::uint64_t work) {
                source_.burn(work);
                nested(probe, loc, u, 1);
            });
        }
        if (!parallel_.empty()) {
            parallel_for(*pool_, probe, loc.parallel, parallel_.size(), 1, [&](std::size_t lo, std::size_t hi) {
                if (baseline != nullptr) baseline->enter();
                for (std::size_t i = lo; i < hi; ++i) {
                    const auto& u = *parallel_[i];
                    source_.burn(u.work.front());
                    nested(probe, loc, u, 1);
                }
            });
        }

        result.seconds = timer.stop();
        if (baseline != nullptr) {
            baseline->leave();
            if (pool_) pool_->broadcast([&] { baseline->leave(); });
            result.baseline_cycles = baseline->total();
            result.participating_threads = baseline->threads();
        }
        if (pool_) pool_->quiesce();
        return result;
    }

private:
    // Spans 1.. of a unit: a chain nests each in the previous, a fan nests
    // all of them directly in the root.
    void nested(Probe* probe, const Locations& loc, const WorkUnit& u, std::size_t i) {
        if (i >= u.work.size()) return;
        if (u.chain) {
            for_each(probe, loc.nested, std::views::single(u.work[i]), [&](std::uint64_t work) {
                source_.burn(work);
                nested(probe, loc, u, i + 1);
            });
            return;
        }
        for (; i < u.work.size(); ++i) {
            for_each(probe, loc.nested, std::views::single(u.work[i]), [&](std::uint64_t work) { source_.burn(work); });
        }
    }

    const WorkloadSpec& spec_;
    CycleSource& source_;
    std::vector<WorkUnit> units_;
    std::vector<const WorkUnit*> parallel_;
    std::unique_ptr<ForkJoinPool> pool_;
};

IterationResult profiled_iteration(Executor& exec, CycleSource& source, const std::filesystem::path& dir,
                                   std::size_t capacity) {
    Recorder recorder(source, RecorderConfig{dir, capacity, "locations.tsv"});
    Probe probe(recorder);
    const auto loc = exec.register_locations(recorder);
    auto result = exec.iterate(&probe, loc);
    if (recorder.deferred_failures() > 0) {
        throw IoFailure(std::to_string(recorder.deferred_failures()) + " trace writes failed during the run");
    }
    if (dir.empty()) {
        result.traces = recorder.snapshot();
    } else {
        recorder.flush_all();
        result.trace_dir = dir;
    }
    result.locations = recorder.locations().entries();
    return result;
}

std::filesystem::path run_dir(const std::filesystem::path& root, std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "run-%03zu", i);
    return root / name;
}

double cv_or_zero(std::span<const double> values) {
    try {
        return coefficient_of_variation(values);
    } catch (const ZeroDenominator&) {
        return 0.0;
    }
}

}  // namespace

std::vector<IterationResult> run_workload(const WorkloadSpec& spec, CycleSource& source, const RunOptions& options) {
    Executor exec(spec, source);
    for (std::size_t i = 0; i < options.warmup; ++i) {
        if (options.profiled) {
            profiled_iteration(exec, source, {}, options.buffer_capacity);
        } else {
            exec.iterate(nullptr, {});
        }
    }
    std::vector<IterationResult> results;
    results.reserve(options.iterations);
    for (std::size_t i = 0; i < options.iterations; ++i) {
        if (options.profiled) {
            const auto dir = options.trace_root.empty() ? std::filesystem::path{} : run_dir(options.trace_root, i);
            results.push_back(profiled_iteration(exec, source, dir, options.buffer_capacity));
        } else {
            results.push_back(exec.iterate(nullptr, {}));
        }
    }
    return results;
}

AccuracyResult run_accuracy_experiment(const WorkloadSpec& spec, CycleSource& source, const CostModel& costs,
                                       std::size_t runs, std::size_t warmup) {
    if (runs == 0) throw UsageError("accuracy experiment needs at least one run");
    Executor exec(spec, source);
    for (std::size_t i = 0; i < warmup; ++i) {
        exec.iterate(nullptr, {});
        profiled_iteration(exec, source, {}, std::size_t{1} << 16);
    }
    AccuracyResult out;
    for (std::size_t r = 0; r < runs; ++r) {
        const auto plain = exec.iterate(nullptr, {});
        const auto profiled = profiled_iteration(exec, source, {}, std::size_t{1} << 16);
        const auto profile = build_application_profile(profiled.traces);
        const auto totals = compensation_totals(profile, costs);
        out.baselines.push_back(static_cast<double>(*plain.baseline_cycles));
        out.compensated.push_back(totals.compensated_cycles);
        out.span_count = totals.span_count;
    }
    out.record = evaluate(mean(out.baselines), mean(out.compensated), out.span_count);
    out.baseline_cv = cv_or_zero(out.baselines);
    out.compensated_cv = cv_or_zero(out.compensated);
    return out;
}

OverheadResult run_overhead_experiment(const WorkloadSpec& spec, CycleSource& source, std::size_t pairs,
                                       std::size_t warmup) {
    if (pairs == 0) throw UsageError("overhead experiment needs at least one pair");
    Executor exec(spec, source);
    for (std::size_t i = 0; i < warmup; ++i) {
        exec.iterate(nullptr, {});
        profiled_iteration(exec, source, {}, std::size_t{1} << 16);
    }
    OverheadResult out;
    for (std::size_t i = 0; i < pairs; ++i) {
        out.plain_seconds.push_back(exec.iterate(nullptr, {}).seconds);
        out.profiled_seconds.push_back(profiled_iteration(exec, source, {}, std::size_t{1} << 16).seconds);
    }
    out.summary = summarize_overhead(out.profiled_seconds, out.plain_seconds);
    return out;
}

}  // namespace spanprof

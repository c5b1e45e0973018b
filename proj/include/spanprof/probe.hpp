#pragma once

// Instrumentation wrappers placed around pipeline executions.
//
// A sequential pipeline run is one anonymous span (ASB ... SE). Every task
// body of a parallel pipeline is one named span; the first task to run
// claims a fresh stream id on the pipeline handle and records PSB, every
// later task reads the id back and records SSB.

#include "spanprof/recorder.hpp"

#include <atomic>
#include <optional>
#include <string_view>
#include <utility>

namespace spanprof {

enum class SpanKind : std::uint8_t { Anonymous, Primordial, Support };

const char* to_string(SpanKind kind);

// Process-wide stream id source, counting from 0.
StreamId next_stream_id() noexcept;
// The id the next call to next_stream_id() would hand out.
StreamId peek_next_stream_id() noexcept;

// Shared by all tasks of one parallel pipeline execution. The head slot is
// set at most once.
class PipelineHandle {
public:
    explicit PipelineHandle(bool parallel = true) : parallel_(parallel) {}

    PipelineHandle(const PipelineHandle&) = delete;
    PipelineHandle& operator=(const PipelineHandle&) = delete;

    bool is_parallel() const noexcept { return parallel_; }

    std::optional<StreamId> stream_id() const noexcept {
        const auto id = slot_.load(std::memory_order_acquire);
        if (id < 0) return std::nullopt;
        return id;
    }

    // Returns the stream id and whether this call generated it.
    std::pair<StreamId, bool> acquire_stream_id() noexcept {
        auto id = slot_.load(std::memory_order_acquire);
        if (id >= 0) return {id, false};
        const StreamId fresh = next_stream_id();
        if (slot_.compare_exchange_strong(id, fresh, std::memory_order_acq_rel, std::memory_order_acquire)) {
            return {fresh, true};
        }
        return {id, false};
    }

    // Pre-sets the slot (used to exercise the support path in isolation).
    void preset(StreamId id) noexcept { slot_.store(id, std::memory_order_release); }

private:
    std::atomic<StreamId> slot_{kAnonymousStream};
    bool parallel_;
};

// Emits one begin on construction and exactly one SE when it goes out of
// scope, including during unwinding. Thread-confined.
class SpanGuard {
public:
    SpanGuard() = default;
    SpanGuard(Recorder& recorder, MethodId method, SpanKind kind) noexcept
        : recorder_(&recorder), method_(method), kind_(kind) {}

    SpanGuard(SpanGuard&& other) noexcept
        : recorder_(std::exchange(other.recorder_, nullptr)), method_(other.method_), kind_(other.kind_) {}
    SpanGuard& operator=(SpanGuard&& other) noexcept {
        if (this != &other) {
            release();
            recorder_ = std::exchange(other.recorder_, nullptr);
            method_ = other.method_;
            kind_ = other.kind_;
        }
        return *this;
    }
    SpanGuard(const SpanGuard&) = delete;
    SpanGuard& operator=(const SpanGuard&) = delete;

    ~SpanGuard() { release(); }

    // Records SE now; later calls are no-ops.
    void release() noexcept {
        if (recorder_ == nullptr) return;
        auto* recorder = std::exchange(recorder_, nullptr);
        try {
            recorder->end_span();
        } catch (...) {
            recorder->note_deferred_failure();
        }
    }

    bool active() const noexcept { return recorder_ != nullptr; }
    MethodId method_id() const noexcept { return method_; }
    SpanKind kind() const noexcept { return kind_; }

private:
    Recorder* recorder_ = nullptr;
    MethodId method_ = 0;
    SpanKind kind_ = SpanKind::Anonymous;
};

class Probe {
public:
    explicit Probe(Recorder& recorder) : recorder_(recorder) {}

    Recorder& recorder() noexcept { return recorder_; }

    // ASB now, SE when the guard is released.
    SpanGuard enter_sequential_execution(MethodId method) noexcept;

    // PSB if this task claims the stream id, SSB otherwise.
    SpanGuard enter_task_execution(PipelineHandle& handle, MethodId method) noexcept;

    MethodId resolve_location(std::string_view call_site) { return recorder_.register_location(call_site); }

private:
    Recorder& recorder_;
};

// Caches the method id of one call site for the most recently used recorder.
class CallSite {
public:
    explicit CallSite(std::string_view qualified_name) : name_(qualified_name) {}

    MethodId id(Probe& probe);
    std::string_view name() const noexcept { return name_; }

private:
    std::string_view name_;
    std::atomic<std::uint64_t> cache_{0};
};

// "void ns::Type::fn(int) const" -> "ns::Type::fn"
std::string_view qualified_function_name(std::string_view pretty) noexcept;

template <typename Body>
decltype(auto) profile_sequential(Probe& probe, MethodId location, Body&& body) {
    auto guard = probe.enter_sequential_execution(location);
    return std::forward<Body>(body)();
}

template <typename Body>
decltype(auto) profile_parallel_task(Probe& probe, PipelineHandle& handle, MethodId location, Body&& body) {
    auto guard = probe.enter_task_execution(handle, location);
    return std::forward<Body>(body)();
}

}  // namespace spanprof

// Method id of the enclosing function, resolved once per recorder.
#define SPANPROF_LOCATION(probe)                                                             \
    ([](::spanprof::Probe& spanprof_probe_, const char* spanprof_fn_) {                      \
        static ::spanprof::CallSite spanprof_site_{::spanprof::qualified_function_name(spanprof_fn_)}; \
        return spanprof_site_.id(spanprof_probe_);                                           \
    }((probe), __PRETTY_FUNCTION__))

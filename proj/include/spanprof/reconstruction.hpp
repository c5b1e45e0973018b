#pragma once

// Offline span reconstruction: per-thread stack processing, merging of named
// spans across threads, outer-span inheritance through primordial spans,
// nesting levels, and compensation of instrumentation cost.

#include "spanprof/cost_model.hpp"
#include "spanprof/probe.hpp"
#include "spanprof/trace_format.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spanprof {

using SpanIndex = std::size_t;

struct Span {
    std::uint64_t cycles_begin = 0;
    std::uint64_t cycles_end = 0;
    StreamId stream_id = kAnonymousStream;
    MethodId method_id = 0;
    ThreadId thread_id = 0;
    bool is_primordial = false;

    // Sum of the measured cycles of directly nested spans on this thread.
    std::uint64_t nested_cycles = 0;
    std::uint32_t nested_anonymous_spans = 0;
    std::uint32_t nested_primordial_spans = 0;
    std::uint32_t nested_support_spans = 0;

    // Same-thread enclosing span. Indices refer to the owning profile's span list.
    std::optional<SpanIndex> parent;
    // For support spans: the stream's primordial span.
    std::optional<SpanIndex> primordial;
    int nesting_level = -1;

    // The enclosing span was still open when the trace ended.
    bool parent_incomplete = false;

    std::uint64_t measured_cycles() const noexcept { return cycles_end - cycles_begin; }
    bool is_named() const noexcept { return stream_id != kAnonymousStream; }
    SpanKind kind() const noexcept {
        if (!is_named()) return SpanKind::Anonymous;
        return is_primordial ? SpanKind::Primordial : SpanKind::Support;
    }
};

// A begin event whose end never made it into the trace.
struct IncompleteSpan {
    ThreadId thread_id = 0;
    EventType type = EventType::ASB;
    std::uint64_t cycles_begin = 0;
    StreamId stream_id = kAnonymousStream;
    MethodId method_id = 0;
    std::size_t stack_depth = 0;
};

struct ThreadProfile {
    ThreadId thread_id = 0;
    std::string thread_name;
    // Completion (SE) order.
    std::vector<Span> spans;
    std::map<StreamId, std::vector<SpanIndex>> named_spans;
    std::vector<IncompleteSpan> incomplete;
};

// Throws MalformedTrace(UnbalancedEnd | NonMonotonicCycles | BadRecord);
// `origin` names the trace in diagnostics and offsets are event indices.
ThreadProfile reconstruct_thread(std::span<const SpanEvent> events, ThreadId thread_id, std::string thread_name,
                                 const std::string& origin = "<memory>");

struct ThreadSummary {
    ThreadId thread_id = 0;
    std::string thread_name;
    std::size_t span_count = 0;
    std::size_t first_span = 0;
};

struct ApplicationProfile {
    std::vector<Span> all_spans;
    std::map<StreamId, std::vector<SpanIndex>> merged_named_spans;
    std::vector<IncompleteSpan> incomplete_spans;
    std::vector<ThreadSummary> threads;
    CycleSourceDescriptor source;
    std::map<MethodId, std::string> locations;

    std::string location_name(MethodId id) const;
};

// Union of the per-thread buckets with span indices rebased onto the
// concatenation of `threads` (in the given order). Throws
// DuplicatePrimordial when a stream does not have exactly one primordial,
// unless that primordial is still open (listed in `incomplete`).
std::map<StreamId, std::vector<SpanIndex>> merge_named_spans(std::span<const ThreadProfile> threads);

// Points every support span at its stream's primordial span.
void update_primordial(ApplicationProfile& profile);

// primordial.parent for support spans, parent otherwise.
std::optional<SpanIndex> outer_span(const ApplicationProfile& profile, SpanIndex span);

// Throws CyclicNesting if an outer chain loops.
void compute_nesting_levels(ApplicationProfile& profile);

// Orders threads by id, merges, links and computes nesting levels.
ApplicationProfile build_application_profile(std::vector<ThreadProfile> threads, CycleSourceDescriptor source = {});

// Reconstructs every trace (all must share one cycle source kind).
ApplicationProfile build_application_profile(std::span<const TraceData> traces);

// Loads every *.sptr in `dir`, plus the location file when given.
ApplicationProfile load_application_profile(const std::filesystem::path& dir,
                                            const std::optional<std::filesystem::path>& location_file);

struct Compensation {
    double raw = 0.0;
    double cycles = 0.0;  // raw clamped below at 0
    bool under_compensated = false;
};

// measured - nested - n_anon*OC_ANON - n_prim*OC_PRIM - n_supp*OC_SUPP - IC
Compensation compensate(const Span& span, const CostModel& costs) noexcept;
double compensated_cycles(const Span& span, const CostModel& costs) noexcept;

struct CompensationTotals {
    double compensated_cycles = 0.0;
    std::uint64_t measured_cycles = 0;
    std::size_t span_count = 0;
    std::size_t under_compensated_spans = 0;
    std::size_t incomplete_spans = 0;
};

// Throws MixedSourceError if the cost model and profile use different sources.
CompensationTotals compensation_totals(const ApplicationProfile& profile, const CostModel& costs);
double total_compensated_cycles(const ApplicationProfile& profile, const CostModel& costs);

}  // namespace spanprof

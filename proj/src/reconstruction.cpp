#include "spanprof/reconstruction.hpp"

#include "spanprof/errors.hpp"
#include "spanprof/stats.hpp"

#include <algorithm>
#include <set>

namespace spanprof {

std::string ApplicationProfile::location_name(MethodId id) const {
    if (const auto it = locations.find(id); it != locations.end()) return it->second;
    return "<method " + std::to_string(id) + ">";
}

ThreadProfile reconstruct_thread(std::span<const SpanEvent> events, ThreadId thread_id, std::string thread_name,
                                 const std::string& origin) {
    ThreadProfile profile;
    profile.thread_id = thread_id;
    profile.thread_name = std::move(thread_name);

    // Spans live in begin order while open; `completed` records the order
    // in which their SE events arrived.
    std::vector<Span> slots;
    std::vector<std::size_t> stack;
    std::vector<std::size_t> completed;
    slots.reserve(events.size() / 2 + 1);
    completed.reserve(events.size() / 2 + 1);

    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& event = events[i];
        if (i > 0 && event.cycles <= events[i - 1].cycles) {
            throw MalformedTrace(MalformedKind::NonMonotonicCycles, origin, i,
                                 "cycles " + std::to_string(event.cycles) + " after " +
                                     std::to_string(events[i - 1].cycles));
        }
        if (event.type == EventType::SE) {
            if (stack.empty()) {
                throw MalformedTrace(MalformedKind::UnbalancedEnd, origin, i, "span end with no open span");
            }
            const auto slot = stack.back();
            stack.pop_back();
            auto& span = slots[slot];
            span.cycles_end = event.cycles;
            if (!stack.empty()) {
                const auto parent_slot = stack.back();
                auto& parent = slots[parent_slot];
                span.parent = parent_slot;
                parent.nested_cycles += span.measured_cycles();
                switch (span.kind()) {
                    case SpanKind::Anonymous: ++parent.nested_anonymous_spans; break;
                    case SpanKind::Primordial: ++parent.nested_primordial_spans; break;
                    case SpanKind::Support: ++parent.nested_support_spans; break;
                }
            }
            completed.push_back(slot);
            continue;
        }

        Span span;
        span.cycles_begin = event.cycles;
        span.method_id = event.method_id;
        span.thread_id = thread_id;
        if (event.type == EventType::ASB) {
            span.stream_id = kAnonymousStream;
        } else {
            if (event.stream_id < 0) {
                throw MalformedTrace(MalformedKind::BadRecord, origin, i, "named span without a stream id");
            }
            span.stream_id = event.stream_id;
            span.is_primordial = event.type == EventType::PSB;
        }
        stack.push_back(slots.size());
        slots.push_back(span);
    }

    constexpr std::size_t kOpen = static_cast<std::size_t>(-1);
    std::vector<std::size_t> remap(slots.size(), kOpen);
    for (std::size_t k = 0; k < completed.size(); ++k) remap[completed[k]] = k;

    profile.spans.reserve(completed.size());
    for (const auto slot : completed) {
        Span span = slots[slot];
        if (span.parent) {
            const auto mapped = remap[*span.parent];
            if (mapped == kOpen) {
                span.parent.reset();
                span.parent_incomplete = true;
            } else {
                span.parent = mapped;
            }
        }
        if (span.is_named()) profile.named_spans[span.stream_id].push_back(profile.spans.size());
        profile.spans.push_back(span);
    }

    for (std::size_t depth = 0; depth < stack.size(); ++depth) {
        const auto& open = slots[stack[depth]];
        IncompleteSpan inc;
        inc.thread_id = thread_id;
        inc.type = !open.is_named() ? EventType::ASB : (open.is_primordial ? EventType::PSB : EventType::SSB);
        inc.cycles_begin = open.cycles_begin;
        inc.stream_id = open.stream_id;
        inc.method_id = open.method_id;
        inc.stack_depth = depth;
        profile.incomplete.push_back(inc);
    }
    return profile;
}

std::map<StreamId, std::vector<SpanIndex>> merge_named_spans(std::span<const ThreadProfile> threads) {
    std::map<StreamId, std::vector<SpanIndex>> merged;
    std::map<StreamId, std::size_t> primordials;
    std::set<StreamId> open_primordials;
    std::size_t base = 0;
    for (const auto& tp : threads) {
        for (const auto& [stream, spans] : tp.named_spans) {
            auto& bucket = merged[stream];
            for (const auto idx : spans) {
                bucket.push_back(base + idx);
                if (tp.spans[idx].is_primordial) ++primordials[stream];
            }
        }
        for (const auto& inc : tp.incomplete) {
            if (inc.type == EventType::PSB) open_primordials.insert(inc.stream_id);
        }
        base += tp.spans.size();
    }
    for (const auto& [stream, bucket] : merged) {
        const auto count = primordials[stream];
        if (count == 1) continue;
        if (count == 0 && open_primordials.contains(stream)) continue;
        throw DuplicatePrimordial(stream, count);
    }
    return merged;
}

void update_primordial(ApplicationProfile& profile) {
    for (const auto& [stream, bucket] : profile.merged_named_spans) {
        std::optional<SpanIndex> primordial;
        for (const auto idx : bucket) {
            if (profile.all_spans[idx].is_primordial) primordial = idx;
        }
        if (!primordial) continue;  // primordial still open: supports stay unlinked
        for (const auto idx : bucket) {
            auto& span = profile.all_spans[idx];
            if (!span.is_primordial) span.primordial = primordial;
        }
    }
}

std::optional<SpanIndex> outer_span(const ApplicationProfile& profile, SpanIndex span) {
    const auto& s = profile.all_spans[span];
    if (s.primordial) return profile.all_spans[*s.primordial].parent;
    return s.parent;
}

void compute_nesting_levels(ApplicationProfile& profile) {
    constexpr int kVisiting = -2;
    auto& spans = profile.all_spans;
    std::vector<SpanIndex> chain;
    for (SpanIndex start = 0; start < spans.size(); ++start) {
        if (spans[start].nesting_level >= 0) continue;
        chain.clear();
        std::optional<SpanIndex> cursor = start;
        int base = -1;
        while (cursor) {
            auto& s = spans[*cursor];
            if (s.nesting_level >= 0) {
                base = s.nesting_level;
                break;
            }
            if (s.nesting_level == kVisiting) {
                for (const auto idx : chain) spans[idx].nesting_level = -1;
                throw CyclicNesting("outer-span chain starting at span " + std::to_string(start) + " loops");
            }
            s.nesting_level = kVisiting;
            chain.push_back(*cursor);
            cursor = outer_span(profile, *cursor);
        }
        // chain runs innermost -> outermost.
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) spans[*it].nesting_level = ++base;
    }
}

ApplicationProfile build_application_profile(std::vector<ThreadProfile> threads, CycleSourceDescriptor source) {
    std::sort(threads.begin(), threads.end(),
              [](const ThreadProfile& a, const ThreadProfile& b) { return a.thread_id < b.thread_id; });
    for (std::size_t i = 1; i < threads.size(); ++i) {
        if (threads[i].thread_id == threads[i - 1].thread_id) {
            throw MalformedTrace(MalformedKind::BadHeader, "", 0,
                                 "two traces claim thread id " + std::to_string(threads[i].thread_id));
        }
    }

    ApplicationProfile profile;
    profile.source = std::move(source);
    profile.merged_named_spans = merge_named_spans(threads);
    for (auto& tp : threads) {
        const std::size_t base = profile.all_spans.size();
        profile.threads.push_back({tp.thread_id, tp.thread_name, tp.spans.size(), base});
        for (auto& span : tp.spans) {
            if (span.parent) span.parent = *span.parent + base;
            profile.all_spans.push_back(span);
        }
        profile.incomplete_spans.insert(profile.incomplete_spans.end(), tp.incomplete.begin(), tp.incomplete.end());
    }
    update_primordial(profile);
    compute_nesting_levels(profile);
    return profile;
}

ApplicationProfile build_application_profile(std::span<const TraceData> traces) {
    std::vector<ThreadProfile> threads;
    threads.reserve(traces.size());
    CycleSourceDescriptor source;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        if (i == 0) {
            source = t.header.source;
        } else {
            require_same_source(source, t.header.source, t.origin);
        }
        threads.push_back(reconstruct_thread(t.events, t.header.thread_id, t.header.thread_name, t.origin));
    }
    return build_application_profile(std::move(threads), std::move(source));
}

ApplicationProfile load_application_profile(const std::filesystem::path& dir,
                                            const std::optional<std::filesystem::path>& location_file) {
    std::vector<TraceData> traces;
    for (const auto& path : list_trace_files(dir)) traces.push_back(read_trace_file(path));
    auto profile = build_application_profile(traces);
    if (location_file) {
        for (auto& entry : read_location_file(*location_file)) profile.locations.emplace(entry.id, std::move(entry.name));
    }
    return profile;
}

Compensation compensate(const Span& span, const CostModel& costs) noexcept {
    Compensation c;
    c.raw = static_cast<double>(span.measured_cycles() - span.nested_cycles) -
            static_cast<double>(span.nested_anonymous_spans) * costs.oc_anon.mean_cycles -
            static_cast<double>(span.nested_primordial_spans) * costs.oc_prim.mean_cycles -
            static_cast<double>(span.nested_support_spans) * costs.oc_supp.mean_cycles - costs.ic.mean_cycles;
    c.under_compensated = c.raw < 0.0;
    c.cycles = c.under_compensated ? 0.0 : c.raw;
    return c;
}

double compensated_cycles(const Span& span, const CostModel& costs) noexcept { return compensate(span, costs).cycles; }

CompensationTotals compensation_totals(const ApplicationProfile& profile, const CostModel& costs) {
    if (costs.source) require_same_source(*costs.source, profile.source, "cost model vs traces");
    CompensationTotals totals;
    ExactSum sum;
    for (const auto& span : profile.all_spans) {
        const auto c = compensate(span, costs);
        sum.add(c.cycles);
        totals.measured_cycles += span.measured_cycles();
        if (c.under_compensated) ++totals.under_compensated_spans;
    }
    totals.compensated_cycles = sum.value();
    totals.span_count = profile.all_spans.size();
    totals.incomplete_spans = profile.incomplete_spans.size();
    return totals;
}

double total_compensated_cycles(const ApplicationProfile& profile, const CostModel& costs) {
    return compensation_totals(profile, costs).compensated_cycles;
}

}  // namespace spanprof

#include "spanprof/probe.hpp"

namespace spanprof {

namespace {
std::atomic<StreamId> g_next_stream{0};
}

const char* to_string(SpanKind kind) {
    switch (kind) {
        case SpanKind::Anonymous: return "anonymous";
        case SpanKind::Primordial: return "primordial";
        case SpanKind::Support: return "support";
    }
    return "?";
}

StreamId next_stream_id() noexcept { return g_next_stream.fetch_add(1, std::memory_order_relaxed); }

StreamId peek_next_stream_id() noexcept { return g_next_stream.load(std::memory_order_relaxed); }

// A failed dump while recording the begin event still leaves the event in
// memory, so the guard is returned active either way to keep traces balanced.
SpanGuard Probe::enter_sequential_execution(MethodId method) noexcept {
    try {
        recorder_.begin_anonymous(method);
    } catch (...) {
        recorder_.note_deferred_failure();
    }
    return SpanGuard(recorder_, method, SpanKind::Anonymous);
}

SpanGuard Probe::enter_task_execution(PipelineHandle& handle, MethodId method) noexcept {
    const auto [stream, created] = handle.acquire_stream_id();
    try {
        if (created) {
            recorder_.begin_primordial(method, stream);
        } else {
            recorder_.begin_support(method, stream);
        }
    } catch (...) {
        recorder_.note_deferred_failure();
    }
    return SpanGuard(recorder_, method, created ? SpanKind::Primordial : SpanKind::Support);
}

MethodId CallSite::id(Probe& probe) {
    const std::uint64_t owner = probe.recorder().instance_id();
    const auto cached = cache_.load(std::memory_order_acquire);
    if ((cached >> 32) == owner) return static_cast<MethodId>(cached & 0xFFFFFFFFu);
    const MethodId id = probe.resolve_location(name_);
    cache_.store((owner << 32) | id, std::memory_order_release);
    return id;
}

std::string_view qualified_function_name(std::string_view pretty) noexcept {
    // Find the '(' that opens the parameter list: the first one outside any
    // template argument list.
    int depth = 0;
    std::size_t open = std::string_view::npos;
    for (std::size_t i = 0; i < pretty.size(); ++i) {
        const char c = pretty[i];
        if (c == '<') ++depth;
        else if (c == '>') --depth;
        else if (c == '(' && depth == 0) {
            // "operator()" has its own parentheses.
            if (pretty.substr(0, i).ends_with("operator")) {
                i += 1;
                continue;
            }
            open = i;
            break;
        }
    }
    auto head = pretty.substr(0, open);
    depth = 0;
    std::size_t start = 0;
    for (std::size_t i = head.size(); i-- > 0;) {
        const char c = head[i];
        if (c == '>') ++depth;
        else if (c == '<') --depth;
        else if (c == ' ' && depth == 0) {
            start = i + 1;
            break;
        }
    }
    auto name = head.substr(start);
    while (!name.empty() && (name.front() == '*' || name.front() == '&')) name.remove_prefix(1);
    return name.empty() ? pretty : name;
}

}  // namespace spanprof

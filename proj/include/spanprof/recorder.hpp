#pragma once

#include "spanprof/cycle_source.hpp"
#include "spanprof/trace_format.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace spanprof {

// Dense, stable ids for fully qualified caller names.
class LocationRegistry {
public:
    // Same name, same id. Ids are dense from 0 in first-registration order.
    MethodId register_location(std::string_view qualified_name);

    std::vector<LocationEntry> entries() const;
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, MethodId> ids_;
    std::vector<std::string> names_;
};

struct RecorderConfig {
    // Where traces and the location file go. Empty keeps everything in
    // memory; full buffers then grow instead of being dumped.
    std::filesystem::path output_dir;
    std::size_t buffer_capacity = std::size_t{1} << 20;
    std::string location_file_name = "locations.tsv";
};

// Single-writer event buffer owned by one thread. Overflow segments are
// appended to the thread's one trace file.
class ThreadTraceBuffer {
public:
    ThreadTraceBuffer(ThreadId id, std::string name, std::size_t capacity);
    ~ThreadTraceBuffer();

    ThreadTraceBuffer(const ThreadTraceBuffer&) = delete;
    ThreadTraceBuffer& operator=(const ThreadTraceBuffer&) = delete;

    ThreadId thread_id() const noexcept { return thread_id_; }
    const std::string& thread_name() const noexcept { return thread_name_; }
    std::size_t capacity() const noexcept { return capacity_; }

    // Events still in memory (not yet dumped).
    std::span<const SpanEvent> events() const noexcept { return events_; }
    std::uint64_t dumped_events() const noexcept { return dumped_events_; }
    std::uint64_t dumped_segments() const noexcept { return dumped_segments_; }
    std::uint64_t total_events() const noexcept { return dumped_events_ + events_.size(); }
    const std::filesystem::path& file_path() const noexcept { return path_; }

private:
    friend class Recorder;

    ThreadId thread_id_;
    std::string thread_name_;
    std::size_t capacity_;
    std::vector<SpanEvent> events_;
    std::uint64_t dumped_events_ = 0;
    std::uint64_t dumped_segments_ = 0;
    std::filesystem::path path_;
    std::FILE* file_ = nullptr;
    bool header_written_ = false;
    std::uint64_t committed_bytes_ = 0;
    std::string scratch_;
};

// The tracer: per-thread buffers plus the location registry.
class Recorder {
public:
    Recorder(CycleSource& source, RecorderConfig config = {});
    ~Recorder();

    Recorder(const Recorder&) = delete;
    Recorder& operator=(const Recorder&) = delete;

    CycleSource& source() noexcept { return source_; }
    const RecorderConfig& config() const noexcept { return config_; }
    std::uint64_t instance_id() const noexcept { return instance_id_; }

    MethodId register_location(std::string_view qualified_name) {
        return locations_.register_location(qualified_name);
    }
    const LocationRegistry& locations() const noexcept { return locations_; }

    // Appends to the calling thread's buffer, dumping it first when full.
    // On a failed dump the event is kept in memory and IoFailure is thrown.
    void record_event(const SpanEvent& event);

    // Read the counter and record in one step; these are what probes call.
    void begin_anonymous(MethodId method) { record_event(SpanEvent::anonymous_begin(source_.read().value, method)); }
    void begin_primordial(MethodId method, StreamId stream) {
        record_event(SpanEvent::primordial_begin(source_.read().value, method, stream));
    }
    void begin_support(MethodId method, StreamId stream) {
        record_event(SpanEvent::support_begin(source_.read().value, method, stream));
    }
    void end_span() { record_event(SpanEvent::end(source_.read().value)); }

    // Caller guarantees no thread is recording. Writes one trace per thread
    // that recorded at least one event, plus the location file; returns the
    // trace paths ordered by thread id. No-op returning {} in memory mode.
    std::vector<std::filesystem::path> flush_all();

    // Location file path (valid once output_dir is set).
    std::filesystem::path location_file() const;

    // In-memory view of every buffer, ordered by thread id. Requires quiescence.
    std::vector<TraceData> snapshot() const;

    // Moves the calling thread's in-memory events out of its buffer.
    std::vector<SpanEvent> drain_local();

    ThreadTraceBuffer& local_buffer();

    // IoFailures swallowed by span guards (which cannot throw on scope exit).
    std::uint64_t deferred_failures() const noexcept { return deferred_failures_.load(); }
    void note_deferred_failure() noexcept { deferred_failures_.fetch_add(1); }

private:
    void dump(ThreadTraceBuffer& buffer);
    ThreadTraceBuffer& lookup_buffer();

    CycleSource& source_;
    RecorderConfig config_;
    std::uint64_t instance_id_;
    LocationRegistry locations_;

    mutable std::mutex buffers_mutex_;
    std::unordered_map<ThreadId, std::unique_ptr<ThreadTraceBuffer>> buffers_;
    std::atomic<std::uint64_t> deferred_failures_{0};
};

// Process-local id of the calling thread, assigned on first use.
ThreadId current_thread_id();
std::string current_thread_name();

}  // namespace spanprof

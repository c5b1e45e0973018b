#include "spanprof/recorder.hpp"

#include "spanprof/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>

#if defined(__linux__)
#include <pthread.h>
#endif

namespace spanprof {

namespace {

std::atomic<ThreadId> g_next_thread_id{0};
std::atomic<std::uint64_t> g_next_recorder{1};

}  // namespace

ThreadId current_thread_id() {
    thread_local const ThreadId id = g_next_thread_id.fetch_add(1, std::memory_order_relaxed);
    return id;
}

std::string current_thread_name() {
#if defined(__linux__)
    char name[64] = {};
    if (pthread_getname_np(pthread_self(), name, sizeof(name)) == 0 && name[0] != '\0') return name;
#endif
    return "thread-" + std::to_string(current_thread_id());
}

// --- LocationRegistry ------------------------------------------------------

MethodId LocationRegistry::register_location(std::string_view qualified_name) {
    if (qualified_name.empty()) throw UsageError("location name must be non-empty");
    std::lock_guard lock(mutex_);
    const auto [it, inserted] = ids_.try_emplace(std::string(qualified_name), static_cast<MethodId>(names_.size()));
    if (inserted) names_.emplace_back(qualified_name);
    return it->second;
}

std::vector<LocationEntry> LocationRegistry::entries() const {
    std::lock_guard lock(mutex_);
    std::vector<LocationEntry> out;
    out.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) out.push_back({static_cast<MethodId>(i), names_[i]});
    return out;
}

std::size_t LocationRegistry::size() const {
    std::lock_guard lock(mutex_);
    return names_.size();
}

// --- ThreadTraceBuffer -----------------------------------------------------

ThreadTraceBuffer::ThreadTraceBuffer(ThreadId id, std::string name, std::size_t capacity)
    : thread_id_(id), thread_name_(std::move(name)), capacity_(std::max<std::size_t>(capacity, 1)) {
    events_.reserve(capacity_);
}

ThreadTraceBuffer::~ThreadTraceBuffer() {
    if (file_ != nullptr) std::fclose(file_);
}

// --- Recorder --------------------------------------------------------------

Recorder::Recorder(CycleSource& source, RecorderConfig config)
    : source_(source), config_(std::move(config)), instance_id_(g_next_recorder.fetch_add(1)) {
    if (!config_.output_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(config_.output_dir, ec);
        if (ec) throw IoFailure("cannot create trace directory " + config_.output_dir.string() + ": " + ec.message());
    }
}

Recorder::~Recorder() = default;

ThreadTraceBuffer& Recorder::lookup_buffer() {
    const ThreadId tid = current_thread_id();
    std::lock_guard lock(buffers_mutex_);
    auto& slot = buffers_[tid];
    if (!slot) {
        slot = std::make_unique<ThreadTraceBuffer>(tid, current_thread_name(), config_.buffer_capacity);
        if (!config_.output_dir.empty()) {
            slot->path_ = config_.output_dir / ("trace-" + std::to_string(tid) + ".sptr");
        }
    }
    return *slot;
}

ThreadTraceBuffer& Recorder::local_buffer() {
    struct Cache {
        std::uint64_t owner = 0;
        ThreadTraceBuffer* buffer = nullptr;
    };
    thread_local Cache cache;
    if (cache.owner != instance_id_) cache = {instance_id_, &lookup_buffer()};
    return *cache.buffer;
}

void Recorder::record_event(const SpanEvent& event) {
    auto& buffer = local_buffer();
    if (buffer.events_.size() >= buffer.capacity_ && !config_.output_dir.empty()) {
        try {
            dump(buffer);
        } catch (const IoFailure&) {
            buffer.events_.push_back(event);
            throw;
        }
    }
    buffer.events_.push_back(event);
}

void Recorder::dump(ThreadTraceBuffer& buffer) {
    if (buffer.file_ == nullptr) {
        buffer.file_ = std::fopen(buffer.path_.c_str(), buffer.header_written_ ? "ab" : "wb");
        if (buffer.file_ == nullptr) {
            throw IoFailure("cannot open " + buffer.path_.string() + ": " + std::strerror(errno));
        }
    }
    auto& out = buffer.scratch_;
    out.clear();
    if (!buffer.header_written_) {
        encode_header({source_.descriptor(), buffer.thread_id_, buffer.thread_name_}, out);
    }
    for (const auto& e : buffer.events_) encode_event(e, out);
    if (std::fwrite(out.data(), 1, out.size(), buffer.file_) != out.size() || std::fflush(buffer.file_) != 0) {
        // Nothing is cleared; roll the file back so the retry rewrites the
        // whole segment.
        const int err = errno;
        std::fclose(buffer.file_);
        buffer.file_ = nullptr;
        std::error_code ec;
        std::filesystem::resize_file(buffer.path_, buffer.committed_bytes_, ec);
        throw IoFailure("cannot write " + buffer.path_.string() + ": " + std::strerror(err));
    }
    buffer.header_written_ = true;
    buffer.committed_bytes_ += out.size();
    buffer.dumped_events_ += buffer.events_.size();
    ++buffer.dumped_segments_;
    buffer.events_.clear();
}

std::vector<std::filesystem::path> Recorder::flush_all() {
    if (config_.output_dir.empty()) return {};
    std::vector<std::filesystem::path> paths;
    {
        std::lock_guard lock(buffers_mutex_);
        std::vector<ThreadTraceBuffer*> ordered;
        for (auto& [tid, buffer] : buffers_) ordered.push_back(buffer.get());
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto* a, const auto* b) { return a->thread_id_ < b->thread_id_; });
        for (auto* buffer : ordered) {
            if (buffer->total_events() == 0) continue;
            if (!buffer->events_.empty() || !buffer->header_written_) dump(*buffer);
            if (buffer->file_ != nullptr) {
                std::fclose(buffer->file_);
                buffer->file_ = nullptr;
            }
            paths.push_back(buffer->path_);
        }
    }
    write_location_file(location_file(), locations_.entries());
    return paths;
}

std::filesystem::path Recorder::location_file() const { return config_.output_dir / config_.location_file_name; }

std::vector<TraceData> Recorder::snapshot() const {
    std::lock_guard lock(buffers_mutex_);
    std::vector<TraceData> traces;
    for (const auto& [tid, buffer] : buffers_) {
        if (buffer->events_.empty()) continue;
        TraceData t;
        t.header = {source_.descriptor(), buffer->thread_id_, buffer->thread_name_};
        t.events.assign(buffer->events_.begin(), buffer->events_.end());
        t.origin = "<memory:thread-" + std::to_string(tid) + ">";
        traces.push_back(std::move(t));
    }
    std::sort(traces.begin(), traces.end(),
              [](const TraceData& a, const TraceData& b) { return a.header.thread_id < b.header.thread_id; });
    return traces;
}

std::vector<SpanEvent> Recorder::drain_local() {
    auto& buffer = local_buffer();
    std::vector<SpanEvent> out(buffer.events_.begin(), buffer.events_.end());
    buffer.events_.clear();
    return out;
}

}  // namespace spanprof

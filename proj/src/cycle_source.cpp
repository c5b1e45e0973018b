#include "spanprof/cycle_source.hpp"

#include "spanprof/errors.hpp"

#include <cerrno>
#include <cstring>
#include <ctime>
#include <thread>

#if defined(__linux__)
#include <linux/perf_event.h>
#include <sys/mman.h>
#include <sys/syscall.h>
#include <unistd.h>
#endif

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#define SPANPROF_X86 1
#endif

namespace spanprof {

const char* to_string(CycleSourceKind kind) {
    switch (kind) {
        case CycleSourceKind::HardwareReferenceCycles: return "hardware_reference_cycles";
        case CycleSourceKind::MonotonicClockTicks: return "monotonic_clock_ticks";
        case CycleSourceKind::Scripted: return "scripted";
    }
    return "unknown";
}

std::optional<CycleSourceKind> parse_cycle_source_kind(const std::string& text) {
    if (text == "hardware_reference_cycles" || text == "hw") return CycleSourceKind::HardwareReferenceCycles;
    if (text == "monotonic_clock_ticks" || text == "clock") return CycleSourceKind::MonotonicClockTicks;
    if (text == "scripted" || text == "fake") return CycleSourceKind::Scripted;
    return std::nullopt;
}

std::string CycleSourceDescriptor::unit_label() const {
    return tick_based() ? "tick-based" : "reference-cycles";
}

void require_same_source(const CycleSourceDescriptor& a, const CycleSourceDescriptor& b, const std::string& context) {
    if (a.kind != b.kind) {
        throw MixedSourceError(context + ": cycle source mismatch (" + to_string(a.kind) + " vs " +
                               to_string(b.kind) + ")");
    }
}

namespace {

inline void serialize_fence() {
#ifdef SPANPROF_X86
    _mm_lfence();
#endif
    std::atomic_signal_fence(std::memory_order_seq_cst);
}

inline std::uint64_t strictly_after(std::uint64_t& last, std::uint64_t now) {
    if (now <= last) now = last + 1;
    last = now;
    return now;
}

std::atomic<std::uint64_t> g_source_instances{1};

}  // namespace

void CycleSource::burn(std::uint64_t units) {
    std::uint64_t acc = units;
    for (std::uint64_t i = 0; i < units; ++i) {
        acc += i ^ (acc >> 3);
        asm volatile("" : "+r"(acc));
    }
}

// --- monotonic clock -------------------------------------------------------

MonotonicClockSource::MonotonicClockSource()
    : CycleSource({CycleSourceKind::MonotonicClockTicks, 1'000'000'000ULL, "clock_gettime(CLOCK_MONOTONIC) ns"}) {}

CycleReading MonotonicClockSource::read() {
    // All instances read the same clock, so one per-thread watermark suffices.
    thread_local std::uint64_t last = 0;
    if (serialized_) serialize_fence();
    timespec ts{};
    clock_gettime(CLOCK_MONOTONIC, &ts);
    if (serialized_) serialize_fence();
    const auto now = static_cast<std::uint64_t>(ts.tv_sec) * 1'000'000'000ULL + static_cast<std::uint64_t>(ts.tv_nsec);
    return {strictly_after(last, now)};
}

// --- hardware reference cycles ---------------------------------------------

namespace {

#if defined(__linux__)
struct PerfThreadState {
    int fd = -1;
    perf_event_mmap_page* page = nullptr;
    std::uint64_t last = 0;
    int open_errno = 0;
    bool attempted = false;

    ~PerfThreadState() {
        if (page != nullptr) munmap(page, static_cast<std::size_t>(sysconf(_SC_PAGESIZE)));
        if (fd >= 0) close(fd);
    }

    bool open() {
        if (attempted) return fd >= 0;
        attempted = true;
        perf_event_attr attr{};
        attr.size = sizeof(attr);
        attr.type = PERF_TYPE_HARDWARE;
        attr.config = PERF_COUNT_HW_REF_CPU_CYCLES;
        attr.exclude_kernel = 1;
        attr.exclude_hv = 1;
        fd = static_cast<int>(syscall(SYS_perf_event_open, &attr, 0, -1, -1, 0));
        if (fd < 0) {
            open_errno = errno;
            return false;
        }
        void* mapped = mmap(nullptr, static_cast<std::size_t>(sysconf(_SC_PAGESIZE)), PROT_READ, MAP_SHARED, fd, 0);
        if (mapped != MAP_FAILED) page = static_cast<perf_event_mmap_page*>(mapped);
        return true;
    }

    std::uint64_t read_syscall() const {
        std::uint64_t value = 0;
        if (::read(fd, &value, sizeof(value)) != static_cast<ssize_t>(sizeof(value))) {
            throw UnsupportedPlatform("reading the reference-cycle counter failed");
        }
        return value;
    }

    std::uint64_t read_counter() const {
#ifdef SPANPROF_X86
        if (page != nullptr && page->cap_user_rdpmc) {
            std::uint32_t seq = 0;
            std::uint64_t count = 0;
            do {
                seq = page->lock;
                std::atomic_signal_fence(std::memory_order_seq_cst);
                const std::uint32_t index = page->index;
                if (index == 0) return read_syscall();
                count = static_cast<std::uint64_t>(__rdpmc(static_cast<int>(index - 1)));
                const std::uint16_t width = page->pmc_width;
                count <<= (64 - width);
                count >>= (64 - width);
                count += static_cast<std::uint64_t>(page->offset);
                std::atomic_signal_fence(std::memory_order_seq_cst);
            } while (page->lock != seq);
            return count;
        }
#endif
        return read_syscall();
    }
};

PerfThreadState& perf_state() {
    thread_local PerfThreadState state;
    return state;
}
#endif

}  // namespace

HardwareRefCycleSource::HardwareRefCycleSource()
    : CycleSource({CycleSourceKind::HardwareReferenceCycles, std::nullopt, "perf_event PERF_COUNT_HW_REF_CPU_CYCLES"}) {
    register_thread();
}

bool HardwareRefCycleSource::available() {
#if defined(__linux__)
    return perf_state().open();
#else
    return false;
#endif
}

void HardwareRefCycleSource::register_thread() {
#if defined(__linux__)
    auto& state = perf_state();
    if (!state.open()) {
        throw UnsupportedPlatform(std::string("per-thread reference-cycle counter unavailable: ") +
                                  std::strerror(state.open_errno));
    }
#else
    throw UnsupportedPlatform("per-thread reference-cycle counter requires Linux perf_event");
#endif
}

CycleReading HardwareRefCycleSource::read() {
#if defined(__linux__)
    auto& state = perf_state();
    if (state.fd < 0) register_thread();
    if (serialized_) serialize_fence();
    const auto now = state.read_counter();
    if (serialized_) serialize_fence();
    return {strictly_after(state.last, now)};
#else
    throw UnsupportedPlatform("per-thread reference-cycle counter requires Linux perf_event");
#endif
}

// --- scripted --------------------------------------------------------------

ScriptedCycleSource::ScriptedCycleSource(std::vector<std::uint64_t> increments, std::uint64_t start)
    : CycleSource({CycleSourceKind::Scripted, 1'000'000'000ULL, "scripted virtual clock"}),
      increments_(std::move(increments)),
      start_(start),
      instance_id_(g_source_instances.fetch_add(1, std::memory_order_relaxed)) {
    if (increments_.empty()) throw UsageError("scripted cycle source needs at least one increment");
    for (auto inc : increments_) {
        if (inc == 0) throw UsageError("scripted cycle source increments must be positive");
    }
}

ScriptedCycleSource::ThreadClock& ScriptedCycleSource::local() {
    struct Cache {
        std::uint64_t owner = 0;
        ThreadClock* clock = nullptr;
    };
    thread_local Cache cache;
    if (cache.owner != instance_id_) {
        std::lock_guard lock(registration_mutex_);
        auto& clock = clocks_[std::this_thread::get_id()];
        if (!clock) {
            clock = std::make_unique<ThreadClock>();
            clock->now = start_;
        }
        cache = {instance_id_, clock.get()};
    }
    return *cache.clock;
}

void ScriptedCycleSource::register_thread() { (void)local(); }

CycleReading ScriptedCycleSource::read() {
    auto& clock = local();
    clock.now += increments_[clock.position];
    clock.position = (clock.position + 1) % increments_.size();
    ++clock.reads;
    reads_.fetch_add(1, std::memory_order_relaxed);
    return {clock.now};
}

void ScriptedCycleSource::burn(std::uint64_t units) { local().now += units; }

std::uint64_t ScriptedCycleSource::thread_reads() { return local().reads; }

std::uint64_t ScriptedCycleSource::now() { return local().now; }

// --- factory ---------------------------------------------------------------

std::unique_ptr<CycleSource> make_cycle_source(const CycleSourceOptions& options) {
    std::unique_ptr<CycleSource> source;
    switch (options.kind) {
        case CycleSourceKind::HardwareReferenceCycles:
            if (HardwareRefCycleSource::available()) {
                source = std::make_unique<HardwareRefCycleSource>();
            } else if (options.allow_fallback) {
                source = std::make_unique<MonotonicClockSource>();
            } else {
                throw UnsupportedPlatform("hardware reference cycles requested but unavailable and fallback disabled");
            }
            break;
        case CycleSourceKind::MonotonicClockTicks:
            source = std::make_unique<MonotonicClockSource>();
            break;
        case CycleSourceKind::Scripted:
            source = std::make_unique<ScriptedCycleSource>(options.script);
            break;
    }
    source->set_serialized_reads(options.serialized_reads);
    return source;
}

}  // namespace spanprof

#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

namespace spanprof {

// Elapsed cycles (or cycle-equivalent ticks) on the calling thread. Readings
// taken on different threads are never ordered against each other.
struct CycleReading {
    std::uint64_t value = 0;

    friend auto operator<=>(const CycleReading&, const CycleReading&) = default;
};

enum class CycleSourceKind : std::uint8_t {
    HardwareReferenceCycles = 0,
    MonotonicClockTicks = 1,
    Scripted = 2,
};

const char* to_string(CycleSourceKind kind);
std::optional<CycleSourceKind> parse_cycle_source_kind(const std::string& text);

struct CycleSourceDescriptor {
    CycleSourceKind kind = CycleSourceKind::MonotonicClockTicks;
    std::optional<std::uint64_t> nominal_frequency_hz;
    std::string platform_label;

    // Anything that is not a hardware reference-cycle counter is reported as
    // tick-based so fallback data is never presented as reference cycles.
    bool tick_based() const noexcept { return kind != CycleSourceKind::HardwareReferenceCycles; }
    std::string unit_label() const;

    friend bool operator==(const CycleSourceDescriptor&, const CycleSourceDescriptor&) = default;
};

// Throws MixedSourceError when two descriptors do not describe the same kind of counter.
void require_same_source(const CycleSourceDescriptor& a, const CycleSourceDescriptor& b, const std::string& context);

class CycleSource {
public:
    virtual ~CycleSource() = default;

    // Strictly increasing per thread. Lazily registers the calling thread.
    virtual CycleReading read() = 0;

    // Idempotent; read() calls it implicitly.
    virtual void register_thread() {}

    const CycleSourceDescriptor& descriptor() const noexcept { return descriptor_; }

    bool serialized_reads() const noexcept { return serialized_; }
    void set_serialized_reads(bool on) noexcept { serialized_ = on; }

    // Executes roughly `units` cycles of busy work on the calling thread.
    // Scripted sources advance their virtual clock instead.
    virtual void burn(std::uint64_t units);

protected:
    explicit CycleSource(CycleSourceDescriptor descriptor) : descriptor_(std::move(descriptor)) {}

    CycleSourceDescriptor descriptor_;
    bool serialized_ = false;
};

// CLOCK_MONOTONIC nanoseconds, nudged forward by one tick when two reads land
// on the same nanosecond.
class MonotonicClockSource final : public CycleSource {
public:
    MonotonicClockSource();
    CycleReading read() override;
};

// Per-thread PERF_COUNT_HW_REF_CPU_CYCLES via perf_event_open. Uses rdpmc when
// the kernel allows user-space counter access, read(2) otherwise.
class HardwareRefCycleSource final : public CycleSource {
public:
    // Throws UnsupportedPlatform if the counter cannot be opened on this thread.
    HardwareRefCycleSource();

    static bool available();

    CycleReading read() override;
    void register_thread() override;
};

// Deterministic virtual clock for tests and reproducible end-to-end runs.
// Each thread owns its own clock starting at `start`. Every read first
// advances the clock by the next increment of the (cyclic) script, then
// returns it; burn(n) advances the clock by exactly n.
class ScriptedCycleSource final : public CycleSource {
public:
    explicit ScriptedCycleSource(std::vector<std::uint64_t> increments, std::uint64_t start = 0);

    CycleReading read() override;
    void register_thread() override;
    void burn(std::uint64_t units) override;

    std::uint64_t total_reads() const noexcept { return reads_.load(std::memory_order_relaxed); }
    // Reads performed by the calling thread.
    std::uint64_t thread_reads();
    // The calling thread's clock, without advancing it or counting a read.
    std::uint64_t now();
    const std::vector<std::uint64_t>& increments() const noexcept { return increments_; }

private:
    struct ThreadClock {
        std::uint64_t now = 0;
        std::size_t position = 0;
        std::uint64_t reads = 0;
    };

    ThreadClock& local();

    std::vector<std::uint64_t> increments_;
    std::uint64_t start_;
    std::uint64_t instance_id_;
    std::atomic<std::uint64_t> reads_{0};
    std::mutex registration_mutex_;
    std::unordered_map<std::thread::id, std::unique_ptr<ThreadClock>> clocks_;
};

struct CycleSourceOptions {
    CycleSourceKind kind = CycleSourceKind::HardwareReferenceCycles;
    // Fall back to MonotonicClockTicks when the hardware counter is unavailable.
    bool allow_fallback = true;
    bool serialized_reads = false;
    std::vector<std::uint64_t> script{100};
};

std::unique_ptr<CycleSource> make_cycle_source(const CycleSourceOptions& options);

}  // namespace spanprof

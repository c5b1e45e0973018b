#pragma once

// Binary per-thread trace files and the text location-mapping file.
//
// Trace file, little-endian:
//   "SPTR" u16:version(=1)
//   u8:source_kind u64:nominal_frequency_hz u16:len label[len]
//   u64:thread_id u16:len thread_name[len]
//   records*
// Record: u8 tag (0=ASB 1=SSB 2=PSB 3=SE) then
//   ASB:     u64 cycles, u32 method_id
//   SSB/PSB: u64 cycles, u32 method_id, u64 stream_id
//   SE:      u64 cycles
// A nominal frequency of 0 means "unknown".
//
// Location file: UTF-8, one "method_id<TAB>qualified_name" line per entry,
// ids ascending.

#include "spanprof/cycle_source.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace spanprof {

using MethodId = std::uint32_t;
using StreamId = std::int64_t;
using ThreadId = std::uint64_t;

inline constexpr StreamId kAnonymousStream = -1;

enum class EventType : std::uint8_t { ASB = 0, SSB = 1, PSB = 2, SE = 3 };

const char* to_string(EventType type);

struct SpanEvent {
    EventType type = EventType::SE;
    std::uint64_t cycles = 0;
    StreamId stream_id = kAnonymousStream;  // -1 for ASB and SE
    MethodId method_id = 0;                 // unused for SE

    static SpanEvent anonymous_begin(std::uint64_t cycles, MethodId method) {
        return {EventType::ASB, cycles, kAnonymousStream, method};
    }
    static SpanEvent support_begin(std::uint64_t cycles, MethodId method, StreamId stream) {
        return {EventType::SSB, cycles, stream, method};
    }
    static SpanEvent primordial_begin(std::uint64_t cycles, MethodId method, StreamId stream) {
        return {EventType::PSB, cycles, stream, method};
    }
    static SpanEvent end(std::uint64_t cycles) { return {EventType::SE, cycles, kAnonymousStream, 0}; }

    bool is_begin() const noexcept { return type != EventType::SE; }

    friend bool operator==(const SpanEvent&, const SpanEvent&) = default;
};

inline constexpr char kTraceMagic[4] = {'S', 'P', 'T', 'R'};
inline constexpr std::uint16_t kTraceFormatVersion = 1;
inline constexpr std::size_t kMaxRecordBytes = 1 + 8 + 4 + 8;

struct TraceHeader {
    CycleSourceDescriptor source;
    ThreadId thread_id = 0;
    std::string thread_name;
};

struct TraceData {
    TraceHeader header;
    std::vector<SpanEvent> events;
    std::string origin;  // file path, for diagnostics
};

void encode_header(const TraceHeader& header, std::string& out);
void encode_event(const SpanEvent& event, std::string& out);

// Throws MalformedTrace naming `origin` and the byte offset of the bad record.
TraceData decode_trace(std::span<const std::byte> bytes, const std::string& origin);
// Throws IoFailure when the file cannot be read, MalformedTrace on bad content.
TraceData read_trace_file(const std::filesystem::path& path);

// All "*.sptr" files in `dir`, sorted by path.
std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir);

struct LocationEntry {
    MethodId id = 0;
    std::string name;

    friend bool operator==(const LocationEntry&, const LocationEntry&) = default;
};

void write_location_file(const std::filesystem::path& path, const std::vector<LocationEntry>& entries);
std::vector<LocationEntry> read_location_file(const std::filesystem::path& path);

}  // namespace spanprof

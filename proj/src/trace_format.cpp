#include "spanprof/trace_format.hpp"

#include "spanprof/errors.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace spanprof {

const char* to_string(MalformedKind kind) {
    switch (kind) {
        case MalformedKind::UnbalancedEnd: return "UnbalancedEnd";
        case MalformedKind::NonMonotonicCycles: return "NonMonotonicCycles";
        case MalformedKind::Truncated: return "Truncated";
        case MalformedKind::BadHeader: return "BadHeader";
        case MalformedKind::BadRecord: return "BadRecord";
    }
    return "Unknown";
}

std::string MalformedTrace::format(MalformedKind kind, const std::string& file, std::uint64_t offset,
                                   const std::string& detail) {
    std::string msg = "malformed trace (";
    msg += to_string(kind);
    msg += ") in ";
    msg += file.empty() ? "<memory>" : file;
    msg += " at offset " + std::to_string(offset);
    if (!detail.empty()) msg += ": " + detail;
    return msg;
}

const char* to_string(EventType type) {
    switch (type) {
        case EventType::ASB: return "ASB";
        case EventType::SSB: return "SSB";
        case EventType::PSB: return "PSB";
        case EventType::SE: return "SE";
    }
    return "?";
}

namespace {

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::is_unsigned_v<T>);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xFFu));
    }
}

void put_string(std::string& out, const std::string& text) {
    const auto len = std::min<std::size_t>(text.size(), std::numeric_limits<std::uint16_t>::max());
    put<std::uint16_t>(out, static_cast<std::uint16_t>(len));
    out.append(text, 0, len);
}

class Reader {
public:
    Reader(std::span<const std::byte> bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

    std::size_t offset() const noexcept { return pos_; }
    bool done() const noexcept { return pos_ >= bytes_.size(); }

    template <typename T>
    T get(std::size_t record_start, const char* what) {
        if (bytes_.size() - pos_ < sizeof(T)) {
            throw MalformedTrace(MalformedKind::Truncated, origin_, record_start,
                                 std::string("unexpected end of file while reading ") + what);
        }
        T value = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            value |= static_cast<T>(static_cast<T>(std::to_integer<std::uint8_t>(bytes_[pos_ + i])) << (8 * i));
        }
        pos_ += sizeof(T);
        return value;
    }

    std::string get_string(std::size_t record_start, const char* what) {
        const auto len = get<std::uint16_t>(record_start, what);
        if (bytes_.size() - pos_ < len) {
            throw MalformedTrace(MalformedKind::Truncated, origin_, record_start,
                                 std::string("unexpected end of file while reading ") + what);
        }
        std::string text(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return text;
    }

private:
    std::span<const std::byte> bytes_;
    const std::string& origin_;
    std::size_t pos_ = 0;
};

}  // namespace

void encode_header(const TraceHeader& header, std::string& out) {
    out.append(kTraceMagic, sizeof(kTraceMagic));
    put<std::uint16_t>(out, kTraceFormatVersion);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(header.source.kind));
    put<std::uint64_t>(out, header.source.nominal_frequency_hz.value_or(0));
    put_string(out, header.source.platform_label);
    put<std::uint64_t>(out, header.thread_id);
    put_string(out, header.thread_name);
}

void encode_event(const SpanEvent& event, std::string& out) {
    put<std::uint8_t>(out, static_cast<std::uint8_t>(event.type));
    put<std::uint64_t>(out, event.cycles);
    switch (event.type) {
        case EventType::ASB:
            put<std::uint32_t>(out, event.method_id);
            break;
        case EventType::SSB:
        case EventType::PSB:
            put<std::uint32_t>(out, event.method_id);
            put<std::uint64_t>(out, static_cast<std::uint64_t>(event.stream_id));
            break;
        case EventType::SE:
            break;
    }
}

TraceData decode_trace(std::span<const std::byte> bytes, const std::string& origin) {
    TraceData trace;
    trace.origin = origin;
    Reader in(bytes, origin);

    if (bytes.size() < sizeof(kTraceMagic) || std::memcmp(bytes.data(), kTraceMagic, sizeof(kTraceMagic)) != 0) {
        throw MalformedTrace(MalformedKind::BadHeader, origin, 0, "missing SPTR magic");
    }
    (void)in.get<std::uint32_t>(0, "magic");
    const auto version = in.get<std::uint16_t>(0, "format version");
    if (version != kTraceFormatVersion) {
        throw MalformedTrace(MalformedKind::BadHeader, origin, 4, "unsupported format version " + std::to_string(version));
    }
    const auto kind = in.get<std::uint8_t>(0, "source kind");
    if (kind > static_cast<std::uint8_t>(CycleSourceKind::Scripted)) {
        throw MalformedTrace(MalformedKind::BadHeader, origin, 6, "unknown cycle source kind " + std::to_string(kind));
    }
    trace.header.source.kind = static_cast<CycleSourceKind>(kind);
    if (const auto freq = in.get<std::uint64_t>(0, "nominal frequency"); freq != 0) {
        trace.header.source.nominal_frequency_hz = freq;
    }
    trace.header.source.platform_label = in.get_string(0, "platform label");
    trace.header.thread_id = in.get<std::uint64_t>(0, "thread id");
    trace.header.thread_name = in.get_string(0, "thread name");

    while (!in.done()) {
        const auto start = in.offset();
        const auto tag = in.get<std::uint8_t>(start, "record tag");
        if (tag > static_cast<std::uint8_t>(EventType::SE)) {
            throw MalformedTrace(MalformedKind::BadRecord, origin, start, "unknown record tag " + std::to_string(tag));
        }
        SpanEvent event;
        event.type = static_cast<EventType>(tag);
        event.cycles = in.get<std::uint64_t>(start, "cycles");
        if (event.type != EventType::SE) event.method_id = in.get<std::uint32_t>(start, "method id");
        if (event.type == EventType::SSB || event.type == EventType::PSB) {
            const auto raw = in.get<std::uint64_t>(start, "stream id");
            if (raw > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
                throw MalformedTrace(MalformedKind::BadRecord, origin, start, "negative stream id on a named span");
            }
            event.stream_id = static_cast<StreamId>(raw);
        }
        trace.events.push_back(event);
    }
    return trace;
}

TraceData read_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open trace file " + path.string());
    std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoFailure("error reading trace file " + path.string());
    return decode_trace(std::as_bytes(std::span(raw)), path.string());
}

std::vector<std::filesystem::path> list_trace_files(const std::filesystem::path& dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw IoFailure("trace directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".sptr") files.push_back(entry.path());
    }
    if (ec) throw IoFailure("cannot list " + dir.string() + ": " + ec.message());
    std::sort(files.begin(), files.end());
    return files;
}

void write_location_file(const std::filesystem::path& path, const std::vector<LocationEntry>& entries) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write location file " + path.string());
    for (const auto& e : entries) out << e.id << '\t' << e.name << '\n';
    out.flush();
    if (!out) throw IoFailure("error writing location file " + path.string());
}

std::vector<LocationEntry> read_location_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open location file " + path.string());
    std::vector<LocationEntry> entries;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
            throw MalformedTrace(MalformedKind::BadRecord, path.string(), line_no, "expected id<TAB>name");
        }
        LocationEntry entry;
        try {
            std::size_t used = 0;
            const auto id = std::stoull(line.substr(0, tab), &used);
            if (used != tab || id > std::numeric_limits<MethodId>::max()) throw std::invalid_argument("id");
            entry.id = static_cast<MethodId>(id);
        } catch (const std::logic_error&) {
            throw MalformedTrace(MalformedKind::BadRecord, path.string(), line_no, "bad method id");
        }
        entry.name = line.substr(tab + 1);
        if (!entries.empty() && entry.id <= entries.back().id) {
            throw MalformedTrace(MalformedKind::BadRecord, path.string(), line_no, "method ids must ascend");
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

}  // namespace spanprof

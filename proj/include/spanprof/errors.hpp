#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace spanprof {

// Every failure the toolkit reports derives from Error so the CLI can map it
// onto an exit code with a single catch site.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class UnsupportedPlatform : public Error {
public:
    using Error::Error;
};

class IoFailure : public Error {
public:
    using Error::Error;
};

class UsageError : public Error {
public:
    using Error::Error;
};

// Structurally invalid input files (traces, cost models, reports).
class MalformedInput : public Error {
public:
    using Error::Error;
};

enum class MalformedKind {
    UnbalancedEnd,
    NonMonotonicCycles,
    Truncated,
    BadHeader,
    BadRecord,
};

const char* to_string(MalformedKind kind);

class MalformedTrace : public MalformedInput {
public:
    MalformedTrace(MalformedKind kind, std::string file, std::uint64_t offset, const std::string& detail)
        : MalformedInput(format(kind, file, offset, detail)), kind_(kind), file_(std::move(file)), offset_(offset) {}

    MalformedKind kind() const noexcept { return kind_; }
    const std::string& file() const noexcept { return file_; }
    // Byte offset in the file, or the event index for in-memory traces.
    std::uint64_t offset() const noexcept { return offset_; }

private:
    static std::string format(MalformedKind kind, const std::string& file, std::uint64_t offset,
                              const std::string& detail);

    MalformedKind kind_;
    std::string file_;
    std::uint64_t offset_;
};

class DuplicatePrimordial : public Error {
public:
    DuplicatePrimordial(std::int64_t stream_id, std::size_t count)
        : Error("stream " + std::to_string(stream_id) + " has " + std::to_string(count) +
                " primordial spans (expected exactly 1)"),
          stream_id_(stream_id), count_(count) {}

    std::int64_t stream_id() const noexcept { return stream_id_; }
    std::size_t count() const noexcept { return count_; }

private:
    std::int64_t stream_id_;
    std::size_t count_;
};

class CyclicNesting : public Error {
public:
    using Error::Error;
};

class MixedSourceError : public Error {
public:
    using Error::Error;
};

class DegenerateSamples : public Error {
public:
    using Error::Error;
};

class NoParallelWork : public Error {
public:
    using Error::Error;
};

class ZeroBaseline : public Error {
public:
    using Error::Error;
};

class ZeroDenominator : public Error {
public:
    using Error::Error;
};

class DegenerateVariance : public Error {
public:
    using Error::Error;
};

}  // namespace spanprof

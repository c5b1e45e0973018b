#include "spanprof/errors.hpp"
#include "spanprof/trace_format.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstring>

using namespace spanprof;

namespace {

std::string encode(const TraceHeader& h, const std::vector<SpanEvent>& events) {
    std::string out;
    encode_header(h, out);
    for (const auto& e : events) encode_event(e, out);
    return out;
}

TraceData decode(const std::string& bytes, const std::string& origin = "mem") {
    return decode_trace(std::as_bytes(std::span(bytes.data(), bytes.size())), origin);
}

TraceHeader header() {
    return {{CycleSourceKind::MonotonicClockTicks, 1'000'000'000ULL, "test box"}, 42, "worker-1"};
}

}  // namespace

TEST_SUITE("trace_format") {
    TEST_CASE("random traces round-trip through the codec") {
        std::mt19937_64 rng(11);
        test::TraceShape shape;
        shape.max_events = 2000;
        for (int i = 0; i < 50; ++i) {
            const auto events = test::random_trace(rng, shape);
            const auto t = decode(encode(header(), events));
            CHECK(t.events == events);
            CHECK(t.header.thread_id == 42);
            CHECK(t.header.thread_name == "worker-1");
            CHECK(t.header.source == header().source);
        }
    }

    TEST_CASE("unknown frequency is stored as zero") {
        TraceHeader h = header();
        h.source.nominal_frequency_hz.reset();
        CHECK_FALSE(decode(encode(h, {})).header.source.nominal_frequency_hz.has_value());
    }

    TEST_CASE("record sizes follow the framing") {
        std::string out;
        encode_event(SpanEvent::anonymous_begin(1, 2), out);
        CHECK(out.size() == 13);
        out.clear();
        encode_event(SpanEvent::primordial_begin(1, 2, 3), out);
        CHECK(out.size() == 21);
        out.clear();
        encode_event(SpanEvent::end(1), out);
        CHECK(out.size() == 9);
    }

    TEST_CASE("truncation names the byte offset of the broken record") {
        const std::vector<SpanEvent> events{SpanEvent::anonymous_begin(10, 1), SpanEvent::end(20)};
        auto bytes = encode(header(), events);
        std::string head;
        encode_header(header(), head);
        bytes.resize(bytes.size() - 3);
        try {
            decode(bytes, "trace-7.sptr");
            FAIL("expected MalformedTrace");
        } catch (const MalformedTrace& e) {
            CHECK(e.kind() == MalformedKind::Truncated);
            CHECK(e.file() == "trace-7.sptr");
            CHECK(e.offset() == head.size() + 13);
            CHECK(std::string(e.what()).find("trace-7.sptr") != std::string::npos);
        }
    }

    TEST_CASE("bad magic and bad tags") {
        auto bytes = encode(header(), {SpanEvent::end(5)});
        auto bad_magic = bytes;
        bad_magic[0] = 'X';
        try {
            decode(bad_magic);
            FAIL("expected MalformedTrace");
        } catch (const MalformedTrace& e) {
            CHECK(e.kind() == MalformedKind::BadHeader);
        }
        auto bad_tag = bytes;
        std::string head;
        encode_header(header(), head);
        bad_tag[head.size()] = 9;
        try {
            decode(bad_tag);
            FAIL("expected MalformedTrace");
        } catch (const MalformedTrace& e) {
            CHECK(e.kind() == MalformedKind::BadRecord);
            CHECK(e.offset() == head.size());
        }
        CHECK_THROWS_AS(decode(bytes.substr(0, 5)), MalformedTrace);
    }

    TEST_CASE("trace files and listing") {
        test::TempDir dir;
        const std::vector<SpanEvent> events{SpanEvent::support_begin(1, 3, 9), SpanEvent::end(2)};
        for (const auto* name : {"trace-2.sptr", "trace-1.sptr", "notes.txt"}) {
            std::ofstream(dir / name, std::ios::binary) << encode(header(), events);
        }
        const auto files = list_trace_files(dir.path());
        REQUIRE(files.size() == 2);
        CHECK(files[0].filename() == "trace-1.sptr");
        CHECK(read_trace_file(files[0]).events == events);
        CHECK(read_trace_file(files[0]).origin == files[0].string());
        CHECK_THROWS_AS(read_trace_file(dir / "missing.sptr"), IoFailure);
    }

    TEST_CASE("location file round trip and validation") {
        test::TempDir dir;
        const std::vector<LocationEntry> entries{{0, "a::b::run"}, {1, "ns::Type::operator()"}, {5, "x"}};
        write_location_file(dir / "locations.tsv", entries);
        CHECK(read_location_file(dir / "locations.tsv") == entries);

        std::ofstream(dir / "bad.tsv") << "0\tfirst\nnot-a-number\tsecond\n";
        CHECK_THROWS_AS(read_location_file(dir / "bad.tsv"), MalformedTrace);
        std::ofstream(dir / "order.tsv") << "3\tb\n1\ta\n";
        CHECK_THROWS_AS(read_location_file(dir / "order.tsv"), MalformedTrace);
        CHECK_THROWS_AS(read_location_file(dir / "missing.tsv"), IoFailure);
    }
}

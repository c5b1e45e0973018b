#include "spanprof/cost_model.hpp"
#include "spanprof/errors.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace spanprof;

TEST_SUITE("cost_model") {
    TEST_CASE("files round-trip every field") {
        test::TempDir dir;
        CostModel m = CostModel::constants(171.63, 184.25, 212.40, 201.17);
        m.ic.cv = 0.24;
        m.ic.samples_kept = 9'500'000;
        m.ic.samples_total = 10'000'000;
        m.oc_supp.cv = 0.1 + 0.2;
        m.pairs_per_cost = 10'000'000;
        m.source = CycleSourceDescriptor{CycleSourceKind::HardwareReferenceCycles, 3'200'000'000ULL, "M1"};
        m.serialized_reads = true;
        m.iqr_k = 3.0;
        m.warnings = {"one", "two"};
        write_cost_model(dir / "costs.json", m);
        CHECK(read_cost_model(dir / "costs.json") == m);

        const auto plain = CostModel::constants(1, 2, 3, 4);
        CHECK(cost_model_from_json(cost_model_to_json(plain)) == plain);
    }

    TEST_CASE("bad documents are malformed input") {
        CHECK_THROWS_AS(cost_model_from_json("{"), MalformedInput);
        CHECK_THROWS_AS(cost_model_from_json("{}"), MalformedInput);
        auto j = cost_model_to_json(CostModel::constants(1, -2, 3, 4));
        CHECK_THROWS_AS(cost_model_from_json(j), MalformedInput);
        auto v = cost_model_to_json(CostModel::zero());
        v.replace(v.find("\"format_version\": 1"), 19, "\"format_version\": 9");
        CHECK_THROWS_AS(cost_model_from_json(v), MalformedInput);
    }

    TEST_CASE("missing or unwritable files are I/O failures") {
        test::TempDir dir;
        CHECK_THROWS_AS(read_cost_model(dir / "nope.json"), IoFailure);
        std::filesystem::create_directory(dir / "taken");
        CHECK_THROWS_AS(write_cost_model(dir / "taken", CostModel::zero()), IoFailure);
    }
}

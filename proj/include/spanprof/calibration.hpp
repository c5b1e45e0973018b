#pragma once

#include "spanprof/cost_model.hpp"
#include "spanprof/cycle_source.hpp"
#include "spanprof/probe.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spanprof {

// One outer span with a single empty nested span inside it.
struct CalibrationSample {
    std::uint64_t outer_begin = 0;
    std::uint64_t outer_end = 0;
    std::uint64_t nested_begin = 0;
    std::uint64_t nested_end = 0;
    SpanKind kind = SpanKind::Anonymous;
    StreamId stream_id = kAnonymousStream;

    std::uint64_t nested_delta() const noexcept { return nested_end - nested_begin; }
    std::uint64_t outer_bracket() const noexcept { return (nested_begin - outer_begin) + (outer_end - nested_end); }
};

inline constexpr std::uint64_t kFullCalibrationPairs = 10'000'000;
inline constexpr std::uint64_t kMinAcceptedPairs = 1'000;

struct CalibrationConfig {
    std::uint64_t pairs_per_cost = kFullCalibrationPairs;
    double iqr_k = 1.5;
    bool serialized_reads = true;
    // Pairs recorded between two drains of the thread buffer.
    std::size_t batch = 4096;
};

std::vector<CalibrationSample> generate_span_pairs(CycleSource& source, SpanKind kind, const CalibrationConfig& config);

// Mean nested delta after the IQR fence. Throws DegenerateSamples when
// fewer than half of the samples survive (or there are none).
CostEstimate estimate_inner_cost(std::span<const CalibrationSample> samples, double iqr_k = 1.5);

struct OuterCost {
    CostEstimate estimate;  // mean clamped at 0
    double raw_mean = 0.0;
    bool clamped = false;
};

// bracket - IC per sample, then the fenced mean.
OuterCost estimate_outer_cost(std::span<const CalibrationSample> samples, double ic, double iqr_k = 1.5);

struct DirectionCheck {
    bool passed = true;
    std::string message;
};

// Expected ordering of the raw outer costs: primordial >= support >= anonymous.
DirectionCheck check_cost_direction(double oc_anon, double oc_prim, double oc_supp);

// Full session: samples for all three kinds, pooled IC, per-kind outer costs.
CostModel calibrate(CycleSource& source, const CalibrationConfig& config);

}  // namespace spanprof

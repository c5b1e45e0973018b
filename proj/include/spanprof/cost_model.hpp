#pragma once

#include "spanprof/cycle_source.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spanprof {

struct CostEstimate {
    double mean_cycles = 0.0;
    double cv = 0.0;
    std::uint64_t samples_kept = 0;
    std::uint64_t samples_total = 0;

    friend bool operator==(const CostEstimate&, const CostEstimate&) = default;
};

// Instrumentation cost constants for one platform and cycle source:
// inner cost plus the outer cost of a nested anonymous, primordial and
// support span. All four are non-negative.
struct CostModel {
    CostEstimate ic;
    CostEstimate oc_anon;
    CostEstimate oc_prim;
    CostEstimate oc_supp;

    std::uint64_t pairs_per_cost = 0;
    // Unset for hand-written constants, which apply to any source.
    std::optional<CycleSourceDescriptor> source;
    bool serialized_reads = false;
    double iqr_k = 1.5;
    std::string support_mode = "single-thread, stream id pre-set on the handle";
    std::vector<std::string> warnings;

    static CostModel zero();
    static CostModel constants(double ic, double oc_anon, double oc_prim, double oc_supp);

    friend bool operator==(const CostModel&, const CostModel&) = default;
};

inline constexpr int kCostModelFormatVersion = 1;

std::string cost_model_to_json(const CostModel& model);
CostModel cost_model_from_json(const std::string& text, const std::string& origin = "<memory>");

void write_cost_model(const std::filesystem::path& path, const CostModel& model);
CostModel read_cost_model(const std::filesystem::path& path);

}  // namespace spanprof

#pragma once

// JSON documents exchanged between subcommands: the bench summary and the
// analysis report.

#include "spanprof/analysis.hpp"
#include "spanprof/bench.hpp"
#include "spanprof/reconstruction.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spanprof {

struct BenchSummary {
    WorkloadSpec spec;
    CycleSourceDescriptor source;
    std::size_t warmup = 0;
    std::size_t iterations = 0;
    std::string time_unit = "seconds";
    std::vector<double> plain_seconds;
    std::vector<std::uint64_t> baseline_cycles;
    std::vector<double> profiled_seconds;
    std::vector<std::string> trace_dirs;  // relative to the bench output directory
    std::optional<OverheadSummary> overhead;
    std::optional<AccuracyResult> accuracy;

    double baseline_mean() const;
};

std::string bench_summary_to_json(const BenchSummary& summary);
BenchSummary bench_summary_from_json(const std::string& text, const std::string& origin = "<memory>");

struct AnalysisReport {
    CycleSourceDescriptor source;
    CostModel costs;
    CompensationTotals totals;
    std::vector<LocationAggregate> locations;
    std::optional<LoadBalanceReport> load_balance;
    HeatmapMatrix heatmap;
    std::optional<EvaluationRecord> evaluation;
    std::vector<IncompleteSpan> incomplete;
    std::vector<std::string> warnings;
};

inline constexpr int kReportFormatVersion = 1;

// Throws MixedSourceError when the cost model or baseline come from another source.
AnalysisReport analyze_profile(const ApplicationProfile& profile, const CostModel& costs,
                               const std::optional<BenchSummary>& baseline = std::nullopt);

std::string report_to_json(const AnalysisReport& report);
AnalysisReport report_from_json(const std::string& text, const std::string& origin = "<memory>");

void write_report(const std::filesystem::path& path, const AnalysisReport& report);
AnalysisReport read_report(const std::filesystem::path& path);

}  // namespace spanprof

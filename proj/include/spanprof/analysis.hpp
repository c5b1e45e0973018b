#pragma once

#include "spanprof/cost_model.hpp"
#include "spanprof/reconstruction.hpp"
#include "spanprof/stats.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace spanprof {

struct LocationAggregate {
    MethodId method_id = 0;
    std::string qualified_name;
    std::size_t span_count = 0;
    double total_compensated_cycles = 0.0;
    double share_of_total_spans = 0.0;
    double share_of_total_cycles = 0.0;
};

// Every location, sorted by cycles desc, span count desc, method id asc.
// Cycle shares are 0 when the profile has no compensated cycles at all.
std::vector<LocationAggregate> aggregate_locations(const ApplicationProfile& profile, const CostModel& costs);
std::vector<LocationAggregate> hot_locations(const ApplicationProfile& profile, const CostModel& costs, std::size_t k);

inline constexpr std::size_t kCycleBuckets = 12;  // [0,10), [10,100), ..., [1e11, inf)
inline constexpr int kNestingGroupWidth = 10;

// Bucket of a compensated cycle count.
std::size_t cycle_bucket(double cycles) noexcept;
// Lower edge of each bucket.
const std::array<double, kCycleBuckets>& cycle_bucket_edges() noexcept;

class HeatmapMatrix {
public:
    void add(int nesting_level, double cycles);

    // Rows are nesting groups [10g, 10g+9]; columns are cycle buckets.
    std::size_t groups() const noexcept { return counts_.size(); }
    std::uint64_t count(std::size_t group, std::size_t bucket) const { return counts_.at(group).at(bucket); }
    double cycles(std::size_t group, std::size_t bucket) const { return cycles_.at(group).at(bucket).value(); }

    std::uint64_t total_count() const noexcept;
    // Correctly rounded sum of every span added, independent of cell layout.
    double total_cycles() const;

    // Rebuilds a matrix from stored cells (report files); totals come from cell values.
    static HeatmapMatrix from_cells(const std::vector<std::vector<std::uint64_t>>& counts,
                                    const std::vector<std::vector<double>>& cycles);

private:
    void ensure_group(std::size_t group);

    std::vector<std::array<std::uint64_t, kCycleBuckets>> counts_;
    std::vector<std::array<ExactSum, kCycleBuckets>> cycles_;
};

HeatmapMatrix build_heatmap(const ApplicationProfile& profile, const CostModel& costs);

// CSV: header of bucket edges, one row per nesting group, cells "count:cycles".
void write_heatmap_csv(std::ostream& out, const HeatmapMatrix& heatmap);
// Standalone SVG; darker cells hold more total cycles.
void write_heatmap_svg(std::ostream& out, const HeatmapMatrix& heatmap);

struct LoadBalanceReport {
    std::map<ThreadId, double> per_worker_cycles;
    // Silent pool workers added as zeros by a pool-size override.
    std::size_t padded_workers = 0;
    double cv = 0.0;
    std::size_t task_count = 0;

    std::size_t worker_count() const noexcept { return per_worker_cycles.size() + padded_workers; }
};

// Sample CV of per-worker cycles, padded with zeros up to `pool_size`.
// Throws UsageError if pool_size is smaller than the number of values.
double load_balance_cv(std::span<const double> per_worker_cycles, std::size_t pool_size = 0);

// Workers are the threads that completed at least one named span. Throws
// NoParallelWork when the profile has no named spans.
LoadBalanceReport load_balance(const ApplicationProfile& profile, const CostModel& costs,
                               std::optional<std::size_t> pool_size = std::nullopt);

// Recomputes the CV of an existing report with a different pool size.
LoadBalanceReport with_pool_size(LoadBalanceReport report, std::optional<std::size_t> pool_size);

struct EvaluationRecord {
    double baseline_cycles = 0.0;
    double compensated_cycles = 0.0;
    double accuracy = 0.0;
    double cps = 0.0;
    std::optional<double> overhead_factor;
};

// 1 - |profile - baseline| / baseline. Throws ZeroBaseline.
double evaluate_accuracy(double profile_total, double baseline_total);
// Throws ZeroDenominator.
double evaluate_overhead(double time_profiled, double time_plain);
// Total cycles per span. Throws ZeroDenominator for zero spans.
double cycles_per_span(double total_cycles, std::size_t span_count);

EvaluationRecord evaluate(double baseline_total, double compensated_total, std::size_t span_count);

struct OverheadSummary {
    double factor = 0.0;  // mean profiled time / mean plain time
    ConfidenceInterval ratio_ci;  // over per-pair ratios
    std::size_t pairs = 0;
};

OverheadSummary summarize_overhead(std::span<const double> profiled_seconds, std::span<const double> plain_seconds,
                                   double level = 0.95);

// Pearson coefficient. Throws DegenerateVariance.
double correlation(std::span<const double> xs, std::span<const double> ys);

}  // namespace spanprof

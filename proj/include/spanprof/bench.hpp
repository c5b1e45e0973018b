#pragma once

// Synthetic stream workloads and the experiment protocol around them:
// unmeasured warm-up iterations, measured steady-state iterations, and
// either profiled runs (traces) or plain runs (two-point baseline readings).

#include "spanprof/analysis.hpp"
#include "spanprof/cost_model.hpp"
#include "spanprof/cycle_source.hpp"
#include "spanprof/trace_format.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace spanprof {

enum class WorkloadMode { Sequential, Parallel, Mixed };
enum class NestingProfile { Flat, DeepRecursive, FlatMapStyle };

const char* to_string(WorkloadMode mode);
const char* to_string(NestingProfile profile);
std::optional<WorkloadMode> parse_workload_mode(const std::string& text);
std::optional<NestingProfile> parse_nesting_profile(const std::string& text);

struct WorkloadSpec {
    std::string name = "synthetic";
    WorkloadMode mode = WorkloadMode::Sequential;
    // Work units burned inside each span; roughly its cycles-per-span.
    std::uint64_t target_cps = 1000;
    std::size_t span_count = 100;
    NestingProfile nesting = NestingProfile::Flat;
    // DeepRecursive: spans per chain. FlatMapStyle: inner spans per outer span.
    std::size_t depth = 1;
    // Parallel units only: fraction of the total top-level work moved onto
    // the first task. 1 puts all of it there.
    std::optional<double> skew;
    // Per-span work is drawn from target_cps * (1 +- jitter).
    double jitter = 0.0;
    std::size_t workers = 4;
    std::uint64_t seed = 0;
};

// Throws UsageError.
void validate(const WorkloadSpec& spec);

// One top-level unit: a root span plus the spans nested inside it.
// Chains nest each span in the previous one; fans nest every inner span
// directly in the root.
struct WorkUnit {
    std::vector<std::uint64_t> work;  // root first
    bool chain = false;
    bool parallel = false;
};

// Deterministic for a given spec (including seed).
std::vector<WorkUnit> plan_workload(const WorkloadSpec& spec);

struct IterationResult {
    // Wall seconds, or virtual seconds of the calling thread for a scripted source.
    double seconds = 0.0;
    std::optional<std::uint64_t> baseline_cycles;
    std::size_t participating_threads = 0;
    std::filesystem::path trace_dir;     // profiled runs written to disk
    std::vector<TraceData> traces;       // profiled runs kept in memory
    std::vector<LocationEntry> locations;
};

struct RunOptions {
    bool profiled = false;
    std::size_t warmup = 5;
    std::size_t iterations = 20;
    // Profiled iterations write to trace_root/run-NNN when set, else stay in memory.
    std::filesystem::path trace_root;
    std::size_t buffer_capacity = std::size_t{1} << 16;
};

std::vector<IterationResult> run_workload(const WorkloadSpec& spec, CycleSource& source, const RunOptions& options);

struct AccuracyResult {
    EvaluationRecord record;  // averaged over runs
    std::vector<double> baselines;
    std::vector<double> compensated;
    double baseline_cv = 0.0;
    double compensated_cv = 0.0;
    std::size_t span_count = 0;
};

// Each run pairs one plain iteration with one profiled iteration.
AccuracyResult run_accuracy_experiment(const WorkloadSpec& spec, CycleSource& source, const CostModel& costs,
                                       std::size_t runs, std::size_t warmup = 5);

struct OverheadResult {
    OverheadSummary summary;
    std::vector<double> profiled_seconds;
    std::vector<double> plain_seconds;
};

OverheadResult run_overhead_experiment(const WorkloadSpec& spec, CycleSource& source, std::size_t pairs,
                                       std::size_t warmup = 5);

}  // namespace spanprof

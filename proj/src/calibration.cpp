#include "spanprof/calibration.hpp"

#include "spanprof/errors.hpp"
#include "spanprof/recorder.hpp"
#include "spanprof/stats.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace spanprof {

namespace {

class SerializedReadsScope {
public:
    SerializedReadsScope(CycleSource& source, bool on) : source_(source), previous_(source.serialized_reads()) {
        source_.set_serialized_reads(on);
    }
    ~SerializedReadsScope() { source_.set_serialized_reads(previous_); }

    SerializedReadsScope(const SerializedReadsScope&) = delete;
    SerializedReadsScope& operator=(const SerializedReadsScope&) = delete;

private:
    CycleSource& source_;
    bool previous_;
};

// Four events per pair: outer begin, nested begin, nested end, outer end.
void collect(std::span<const SpanEvent> events, SpanKind kind, std::vector<CalibrationSample>& out) {
    for (std::size_t i = 0; i + 3 < events.size(); i += 4) {
        CalibrationSample s;
        s.outer_begin = events[i].cycles;
        s.nested_begin = events[i + 1].cycles;
        s.nested_end = events[i + 2].cycles;
        s.outer_end = events[i + 3].cycles;
        s.kind = kind;
        s.stream_id = events[i + 1].stream_id;
        out.push_back(s);
    }
}

double safe_cv(std::span<const double> values) {
    try {
        return coefficient_of_variation(values);
    } catch (const ZeroDenominator&) {
        return 0.0;
    }
}

CostEstimate fenced_mean(std::span<const double> values, double k, const char* what) {
    if (values.empty()) throw DegenerateSamples(std::string(what) + ": no samples");
    const auto fence = tukey_fence(values, k);
    if (fence.kept.size() * 2 < fence.total) {
        throw DegenerateSamples(std::string(what) + ": only " + std::to_string(fence.kept.size()) + " of " +
                                std::to_string(fence.total) + " samples inside the IQR fence");
    }
    CostEstimate e;
    e.mean_cycles = mean(fence.kept);
    e.cv = safe_cv(fence.kept);
    e.samples_kept = fence.kept.size();
    e.samples_total = fence.total;
    return e;
}

}  // namespace

std::vector<CalibrationSample> generate_span_pairs(CycleSource& source, SpanKind kind, const CalibrationConfig& config) {
    SerializedReadsScope serialized(source, config.serialized_reads);
    Recorder recorder(source, RecorderConfig{{}, config.batch * 4 + 4, "locations.tsv"});
    Probe probe(recorder);
    const MethodId outer = recorder.register_location("spanprof::calibration::outer_span");
    const MethodId nested = recorder.register_location("spanprof::calibration::nested_span");

    PipelineHandle shared;
    if (kind == SpanKind::Support) shared.preset(next_stream_id());

    std::vector<CalibrationSample> samples;
    samples.reserve(config.pairs_per_cost);
    const std::size_t batch = std::max<std::size_t>(config.batch, 1);
    std::uint64_t remaining = config.pairs_per_cost;
    while (remaining > 0) {
        const auto n = static_cast<std::size_t>(std::min<std::uint64_t>(remaining, batch));
        for (std::size_t i = 0; i < n; ++i) {
            recorder.begin_anonymous(outer);
            switch (kind) {
                case SpanKind::Anonymous: {
                    auto guard = probe.enter_sequential_execution(nested);
                    break;
                }
                case SpanKind::Primordial: {
                    PipelineHandle fresh;
                    auto guard = probe.enter_task_execution(fresh, nested);
                    break;
                }
                case SpanKind::Support: {
                    auto guard = probe.enter_task_execution(shared, nested);
                    break;
                }
            }
            recorder.end_span();
        }
        const auto events = recorder.drain_local();
        collect(events, kind, samples);
        remaining -= n;
    }
    return samples;
}

CostEstimate estimate_inner_cost(std::span<const CalibrationSample> samples, double iqr_k) {
    std::vector<double> deltas;
    deltas.reserve(samples.size());
    for (const auto& s : samples) deltas.push_back(static_cast<double>(s.nested_delta()));
    return fenced_mean(deltas, iqr_k, "inner cost");
}

OuterCost estimate_outer_cost(std::span<const CalibrationSample> samples, double ic, double iqr_k) {
    std::vector<double> costs;
    costs.reserve(samples.size());
    for (const auto& s : samples) costs.push_back(static_cast<double>(s.outer_bracket()) - ic);
    OuterCost result;
    result.estimate = fenced_mean(costs, iqr_k, "outer cost");
    result.raw_mean = result.estimate.mean_cycles;
    if (result.raw_mean < 0.0) {
        result.clamped = true;
        result.estimate.mean_cycles = 0.0;
    }
    return result;
}

DirectionCheck check_cost_direction(double oc_anon, double oc_prim, double oc_supp) {
    DirectionCheck check;
    check.passed = oc_prim >= oc_supp && oc_supp >= oc_anon;
    std::ostringstream msg;
    msg << "outer cost ordering " << (check.passed ? "as expected" : "unexpected") << ": prim=" << oc_prim
        << " supp=" << oc_supp << " anon=" << oc_anon;
    check.message = msg.str();
    return check;
}

CostModel calibrate(CycleSource& source, const CalibrationConfig& config) {
    const auto anon = generate_span_pairs(source, SpanKind::Anonymous, config);
    const auto prim = generate_span_pairs(source, SpanKind::Primordial, config);
    const auto supp = generate_span_pairs(source, SpanKind::Support, config);

    std::vector<CalibrationSample> pooled;
    pooled.reserve(anon.size() + prim.size() + supp.size());
    pooled.insert(pooled.end(), anon.begin(), anon.end());
    pooled.insert(pooled.end(), prim.begin(), prim.end());
    pooled.insert(pooled.end(), supp.begin(), supp.end());

    CostModel model;
    model.source = source.descriptor();
    model.pairs_per_cost = config.pairs_per_cost;
    model.serialized_reads = config.serialized_reads;
    model.iqr_k = config.iqr_k;
    model.ic = estimate_inner_cost(pooled, config.iqr_k);

    const auto oc_anon = estimate_outer_cost(anon, model.ic.mean_cycles, config.iqr_k);
    const auto oc_prim = estimate_outer_cost(prim, model.ic.mean_cycles, config.iqr_k);
    const auto oc_supp = estimate_outer_cost(supp, model.ic.mean_cycles, config.iqr_k);
    model.oc_anon = oc_anon.estimate;
    model.oc_prim = oc_prim.estimate;
    model.oc_supp = oc_supp.estimate;

    for (const auto& [name, oc] : {std::pair{"oc_anon", &oc_anon}, {"oc_prim", &oc_prim}, {"oc_supp", &oc_supp}}) {
        if (oc->clamped) {
            model.warnings.push_back(std::string("NegativeCost: ") + name + " mean " + std::to_string(oc->raw_mean) +
                                     " clamped to 0");
        }
    }
    if (config.pairs_per_cost < kMinAcceptedPairs) {
        model.warnings.push_back("pairs_per_cost " + std::to_string(config.pairs_per_cost) + " is below " +
                                 std::to_string(kMinAcceptedPairs) + "; model is not suitable for analysis");
    } else if (config.pairs_per_cost < kFullCalibrationPairs) {
        model.warnings.push_back("desk-scale calibration: pairs_per_cost " + std::to_string(config.pairs_per_cost) +
                                 " (full setting " + std::to_string(kFullCalibrationPairs) + ")");
    }
    if (const auto dir = check_cost_direction(oc_anon.raw_mean, oc_prim.raw_mean, oc_supp.raw_mean); !dir.passed) {
        model.warnings.push_back(dir.message);
    }
    return model;
}

}  // namespace spanprof

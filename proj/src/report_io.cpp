#include "spanprof/report_io.hpp"

#include "json_util.hpp"

namespace spanprof {

using detail::json;

namespace {

json ci_to_json(const ConfidenceInterval& ci) {
    return json{{"mean", ci.mean}, {"lower", ci.lower}, {"upper", ci.upper}};
}

ConfidenceInterval ci_from_json(const json& j) {
    return {j.at("mean").get<double>(), j.at("lower").get<double>(), j.at("upper").get<double>()};
}

json overhead_to_json(const OverheadSummary& o) {
    return json{{"factor", o.factor}, {"ratio_ci95", ci_to_json(o.ratio_ci)}, {"pairs", o.pairs}};
}

OverheadSummary overhead_from_json(const json& j) {
    OverheadSummary o;
    o.factor = j.at("factor").get<double>();
    o.ratio_ci = ci_from_json(j.at("ratio_ci95"));
    o.pairs = j.at("pairs").get<std::size_t>();
    return o;
}

json evaluation_to_json(const EvaluationRecord& e) {
    json j{{"baseline_cycles", e.baseline_cycles},
           {"compensated_cycles", e.compensated_cycles},
           {"accuracy", e.accuracy},
           {"cps", e.cps}};
    j["overhead_factor"] = e.overhead_factor ? json(*e.overhead_factor) : json(nullptr);
    return j;
}

EvaluationRecord evaluation_from_json(const json& j) {
    EvaluationRecord e;
    e.baseline_cycles = j.at("baseline_cycles").get<double>();
    e.compensated_cycles = j.at("compensated_cycles").get<double>();
    e.accuracy = j.at("accuracy").get<double>();
    e.cps = j.at("cps").get<double>();
    if (!j.at("overhead_factor").is_null()) e.overhead_factor = j.at("overhead_factor").get<double>();
    return e;
}

json spec_to_json(const WorkloadSpec& s) {
    json j{{"name", s.name},
           {"mode", to_string(s.mode)},
           {"target_cps", s.target_cps},
           {"span_count", s.span_count},
           {"nesting", to_string(s.nesting)},
           {"depth", s.depth}};
    j["skew"] = s.skew ? json(*s.skew) : json(nullptr);
    j["jitter"] = s.jitter;
    j["workers"] = s.workers;
    j["seed"] = s.seed;
    return j;
}

WorkloadSpec spec_from_json(const json& j) {
    WorkloadSpec s;
    s.name = j.at("name").get<std::string>();
    const auto mode = parse_workload_mode(j.at("mode").get<std::string>());
    const auto nesting = parse_nesting_profile(j.at("nesting").get<std::string>());
    if (!mode || !nesting) throw MalformedInput("unknown workload mode or nesting profile");
    s.mode = *mode;
    s.nesting = *nesting;
    s.target_cps = j.at("target_cps").get<std::uint64_t>();
    s.span_count = j.at("span_count").get<std::size_t>();
    s.depth = j.at("depth").get<std::size_t>();
    if (!j.at("skew").is_null()) s.skew = j.at("skew").get<double>();
    s.jitter = j.at("jitter").get<double>();
    s.workers = j.at("workers").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

const char* event_name(EventType t) {
    switch (t) {
        case EventType::ASB: return "ASB";
        case EventType::SSB: return "SSB";
        case EventType::PSB: return "PSB";
        case EventType::SE: return "SE";
    }
    return "?";
}

EventType event_from_name(const std::string& s) {
    if (s == "ASB") return EventType::ASB;
    if (s == "SSB") return EventType::SSB;
    if (s == "PSB") return EventType::PSB;
    if (s == "SE") return EventType::SE;
    throw MalformedInput("unknown event type " + s);
}

}  // namespace

double BenchSummary::baseline_mean() const {
    if (baseline_cycles.empty()) return 0.0;
    std::vector<double> v(baseline_cycles.begin(), baseline_cycles.end());
    return mean(v);
}

std::string bench_summary_to_json(const BenchSummary& s) {
    json j;
    j["format_version"] = 1;
    j["workload"] = spec_to_json(s.spec);
    j["source"] = detail::descriptor_to_json(s.source);
    j["warmup"] = s.warmup;
    j["iterations"] = s.iterations;
    j["time_unit"] = s.time_unit;
    j["plain_seconds"] = s.plain_seconds;
    j["baseline_cycles"] = s.baseline_cycles;
    j["baseline_mean"] = s.baseline_mean();
    j["profiled_seconds"] = s.profiled_seconds;
    j["trace_dirs"] = s.trace_dirs;
    j["overhead"] = s.overhead ? overhead_to_json(*s.overhead) : json(nullptr);
    if (s.accuracy) {
        const auto& a = *s.accuracy;
        j["accuracy"] = {{"record", evaluation_to_json(a.record)},
                         {"baselines", a.baselines},
                         {"compensated", a.compensated},
                         {"baseline_cv", a.baseline_cv},
                         {"compensated_cv", a.compensated_cv},
                         {"span_count", a.span_count}};
    } else {
        j["accuracy"] = nullptr;
    }
    return j.dump(2) + "\n";
}

BenchSummary bench_summary_from_json(const std::string& text, const std::string& origin) {
    return detail::parse_json_document(text, origin, [&](const json& j) {
        BenchSummary s;
        s.spec = spec_from_json(j.at("workload"));
        s.source = detail::descriptor_from_json(j.at("source"));
        s.warmup = j.at("warmup").get<std::size_t>();
        s.iterations = j.at("iterations").get<std::size_t>();
        s.time_unit = j.at("time_unit").get<std::string>();
        s.plain_seconds = j.at("plain_seconds").get<std::vector<double>>();
        s.baseline_cycles = j.at("baseline_cycles").get<std::vector<std::uint64_t>>();
        s.profiled_seconds = j.at("profiled_seconds").get<std::vector<double>>();
        s.trace_dirs = j.at("trace_dirs").get<std::vector<std::string>>();
        if (!j.at("overhead").is_null()) s.overhead = overhead_from_json(j.at("overhead"));
        if (!j.at("accuracy").is_null()) {
            const auto& a = j.at("accuracy");
            AccuracyResult r;
            r.record = evaluation_from_json(a.at("record"));
            r.baselines = a.at("baselines").get<std::vector<double>>();
            r.compensated = a.at("compensated").get<std::vector<double>>();
            r.baseline_cv = a.at("baseline_cv").get<double>();
            r.compensated_cv = a.at("compensated_cv").get<double>();
            r.span_count = a.at("span_count").get<std::size_t>();
            s.accuracy = std::move(r);
        }
        return s;
    });
}

AnalysisReport analyze_profile(const ApplicationProfile& profile, const CostModel& costs,
                               const std::optional<BenchSummary>& baseline) {
    AnalysisReport r;
    r.source = profile.source;
    r.costs = costs;
    r.totals = compensation_totals(profile, costs);
    r.locations = aggregate_locations(profile, costs);
    r.heatmap = build_heatmap(profile, costs);
    r.incomplete = profile.incomplete_spans;
    try {
        r.load_balance = load_balance(profile, costs);
    } catch (const NoParallelWork&) {
        r.load_balance.reset();
    }
    if (baseline) {
        require_same_source(baseline->source, profile.source, "bench baseline vs traces");
        r.evaluation = evaluate(baseline->baseline_mean(), r.totals.compensated_cycles, r.totals.span_count);
        if (baseline->overhead) r.evaluation->overhead_factor = baseline->overhead->factor;
    }
    if (r.totals.under_compensated_spans > 0) {
        r.warnings.push_back(std::to_string(r.totals.under_compensated_spans) +
                             " spans had negative compensated cycles and were clamped to 0");
    }
    if (r.totals.incomplete_spans > 0) {
        r.warnings.push_back(std::to_string(r.totals.incomplete_spans) +
                             " spans were still open at the end of their trace and are excluded");
    }
    if (profile.source.tick_based()) {
        r.warnings.push_back("cycle counts are " + profile.source.unit_label() + " (" + to_string(profile.source.kind) +
                             "), not hardware reference cycles");
    }
    return r;
}

std::string report_to_json(const AnalysisReport& r) {
    json j;
    j["format_version"] = kReportFormatVersion;
    j["source"] = detail::descriptor_to_json(r.source);
    j["unit"] = r.source.unit_label();
    j["cost_model"] = json::parse(cost_model_to_json(r.costs));
    j["totals"] = {{"span_count", r.totals.span_count},
                   {"incomplete_spans", r.totals.incomplete_spans},
                   {"under_compensated_spans", r.totals.under_compensated_spans},
                   {"measured_cycles", r.totals.measured_cycles},
                   {"compensated_cycles", r.totals.compensated_cycles}};

    json locations = json::array();
    for (const auto& l : r.locations) {
        locations.push_back({{"method_id", l.method_id},
                             {"qualified_name", l.qualified_name},
                             {"span_count", l.span_count},
                             {"total_compensated_cycles", l.total_compensated_cycles},
                             {"share_of_total_spans", l.share_of_total_spans},
                             {"share_of_total_cycles", l.share_of_total_cycles}});
    }
    j["locations"] = std::move(locations);

    if (r.load_balance) {
        json workers = json::array();
        for (const auto& [tid, c] : r.load_balance->per_worker_cycles) {
            workers.push_back({{"thread_id", tid}, {"compensated_cycles", c}});
        }
        j["load_balance"] = {{"per_worker", std::move(workers)},
                             {"padded_workers", r.load_balance->padded_workers},
                             {"cv", r.load_balance->cv},
                             {"task_count", r.load_balance->task_count}};
    } else {
        j["load_balance"] = nullptr;
    }

    json edges = json::array();
    for (const auto e : cycle_bucket_edges()) edges.push_back(e);
    json counts = json::array();
    json cycles = json::array();
    for (std::size_t g = 0; g < r.heatmap.groups(); ++g) {
        json crow = json::array();
        json yrow = json::array();
        for (std::size_t b = 0; b < kCycleBuckets; ++b) {
            crow.push_back(r.heatmap.count(g, b));
            yrow.push_back(r.heatmap.cycles(g, b));
        }
        counts.push_back(std::move(crow));
        cycles.push_back(std::move(yrow));
    }
    j["heatmap"] = {{"cycle_bucket_lower_edges", std::move(edges)},
                    {"nesting_group_width", kNestingGroupWidth},
                    {"cell_counts", std::move(counts)},
                    {"cell_cycles", std::move(cycles)},
                    {"total_count", r.heatmap.total_count()},
                    {"total_cycles", r.heatmap.total_cycles()}};

    j["evaluation"] = r.evaluation ? evaluation_to_json(*r.evaluation) : json(nullptr);

    json incomplete = json::array();
    for (const auto& s : r.incomplete) {
        incomplete.push_back({{"thread_id", s.thread_id},
                              {"type", event_name(s.type)},
                              {"cycles_begin", s.cycles_begin},
                              {"stream_id", s.stream_id},
                              {"method_id", s.method_id},
                              {"stack_depth", s.stack_depth}});
    }
    j["incomplete_spans"] = std::move(incomplete);
    j["warnings"] = r.warnings;
    return j.dump(2) + "\n";
}

AnalysisReport report_from_json(const std::string& text, const std::string& origin) {
    return detail::parse_json_document(text, origin, [&](const json& j) {
        if (j.at("format_version").get<int>() != kReportFormatVersion) {
            throw MalformedInput(origin + ": unsupported report format_version");
        }
        AnalysisReport r;
        r.source = detail::descriptor_from_json(j.at("source"));
        r.costs = cost_model_from_json(j.at("cost_model").dump(), origin);
        const auto& t = j.at("totals");
        r.totals.span_count = t.at("span_count").get<std::size_t>();
        r.totals.incomplete_spans = t.at("incomplete_spans").get<std::size_t>();
        r.totals.under_compensated_spans = t.at("under_compensated_spans").get<std::size_t>();
        r.totals.measured_cycles = t.at("measured_cycles").get<std::uint64_t>();
        r.totals.compensated_cycles = t.at("compensated_cycles").get<double>();

        for (const auto& l : j.at("locations")) {
            LocationAggregate a;
            a.method_id = l.at("method_id").get<MethodId>();
            a.qualified_name = l.at("qualified_name").get<std::string>();
            a.span_count = l.at("span_count").get<std::size_t>();
            a.total_compensated_cycles = l.at("total_compensated_cycles").get<double>();
            a.share_of_total_spans = l.at("share_of_total_spans").get<double>();
            a.share_of_total_cycles = l.at("share_of_total_cycles").get<double>();
            r.locations.push_back(std::move(a));
        }

        if (!j.at("load_balance").is_null()) {
            const auto& lb = j.at("load_balance");
            LoadBalanceReport rep;
            for (const auto& w : lb.at("per_worker")) {
                rep.per_worker_cycles[w.at("thread_id").get<ThreadId>()] = w.at("compensated_cycles").get<double>();
            }
            rep.padded_workers = lb.at("padded_workers").get<std::size_t>();
            rep.cv = lb.at("cv").get<double>();
            rep.task_count = lb.at("task_count").get<std::size_t>();
            r.load_balance = std::move(rep);
        }

        const auto& h = j.at("heatmap");
        r.heatmap = HeatmapMatrix::from_cells(h.at("cell_counts").get<std::vector<std::vector<std::uint64_t>>>(),
                                              h.at("cell_cycles").get<std::vector<std::vector<double>>>());

        if (!j.at("evaluation").is_null()) r.evaluation = evaluation_from_json(j.at("evaluation"));
        for (const auto& s : j.at("incomplete_spans")) {
            IncompleteSpan inc;
            inc.thread_id = s.at("thread_id").get<ThreadId>();
            inc.type = event_from_name(s.at("type").get<std::string>());
            inc.cycles_begin = s.at("cycles_begin").get<std::uint64_t>();
            inc.stream_id = s.at("stream_id").get<StreamId>();
            inc.method_id = s.at("method_id").get<MethodId>();
            inc.stack_depth = s.at("stack_depth").get<std::size_t>();
            r.incomplete.push_back(inc);
        }
        r.warnings = j.at("warnings").get<std::vector<std::string>>();
        return r;
    });
}

void write_report(const std::filesystem::path& path, const AnalysisReport& report) {
    detail::write_text_file(path, report_to_json(report));
}

AnalysisReport read_report(const std::filesystem::path& path) {
    return report_from_json(detail::read_text_file(path), path.string());
}

}  // namespace spanprof

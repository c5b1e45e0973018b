#include "spanprof/cli.hpp"

#include "spanprof/analysis.hpp"
#include "spanprof/bench.hpp"
#include "spanprof/calibration.hpp"
#include "spanprof/cost_model.hpp"
#include "spanprof/errors.hpp"
#include "spanprof/reconstruction.hpp"
#include "spanprof/report_io.hpp"

#include "json_util.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace spanprof {

namespace {

using detail::json;

// "-v,--verbose" -> SPANPROF_VERBOSE
std::string env_name(const std::string& flag) {
    const auto long_name = flag.substr(flag.rfind(',') == std::string::npos ? 0 : flag.rfind(',') + 1);
    std::string name = "SPANPROF_";
    for (const char c : long_name.substr(long_name.find_first_not_of('-'))) {
        name += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    }
    return name;
}

template <typename T>
CLI::Option* option(CLI::App* app, const std::string& flag, T& value, const std::string& help) {
    return app->add_option(flag, value, help)->envname(env_name(flag));
}

CLI::Option* flag(CLI::App* app, const std::string& name, bool& value, const std::string& help) {
    return app->add_flag(name, value, help)->envname(env_name(name));
}

struct SourceArgs {
    std::string source = "hw";
    std::string script = "100";
    bool no_fallback = false;

    void attach(CLI::App* app) {
        option(app, "--source", source, "Cycle source: hw (falls back to clock), clock or fake")
            ->check(CLI::IsMember({"hw", "clock", "fake"}))
            ->capture_default_str();
        option(app, "--script", script, "Comma-separated per-read increments of the fake source")
            ->capture_default_str();
        flag(app, "--no-fallback", no_fallback, "Fail instead of falling back to clock ticks");
    }

    std::unique_ptr<CycleSource> make(std::ostream& err, bool verbose) const {
        CycleSourceOptions o;
        o.kind = *parse_cycle_source_kind(source);
        o.allow_fallback = !no_fallback;
        o.script.clear();
        std::stringstream ss(script);
        for (std::string item; std::getline(ss, item, ',');) {
            try {
                std::size_t used = 0;
                const auto v = std::stoull(item, &used);
                if (used != item.size()) throw std::invalid_argument(item);
                o.script.push_back(v);
            } catch (const std::exception&) {
                throw UsageError("--script: '" + item + "' is not a positive integer");
            }
        }
        auto src = make_cycle_source(o);
        if (o.kind == CycleSourceKind::HardwareReferenceCycles && src->descriptor().tick_based()) {
            err << "note: hardware reference cycles unavailable, using " << to_string(src->descriptor().kind)
                << " (results are tick-based)\n";
        } else if (verbose) {
            err << "cycle source: " << to_string(src->descriptor().kind) << "\n";
        }
        return src;
    }
};

struct CalibrateArgs {
    SourceArgs source;
    std::uint64_t pairs = 100'000;
    std::string out;
    bool serialized = true;
    std::string kind = "all";
};

struct AnalyzeArgs {
    std::string traces;
    std::string locations;
    std::string costs;
    std::string out;
    std::string baseline;
};

struct ReportArgs {
    std::string in;
    std::string heatmap;
    std::string svg;
    std::size_t hot = 10;
    std::size_t pool_size = 0;
};

struct BenchArgs {
    SourceArgs source;
    WorkloadSpec spec;
    std::string mode = "seq";
    std::string nesting;
    double skew = -1.0;
    std::size_t warmup = 5;
    std::size_t iterations = 20;
    bool profile = false;
    std::string costs;
    bool accuracy = false;
    std::size_t runs = 10;
    std::string out;
};

int do_calibrate(const CalibrateArgs& a, bool verbose, std::ostream& out, std::ostream& err) {
    auto source = a.source.make(err, verbose);
    CalibrationConfig config;
    config.pairs_per_cost = a.pairs;
    config.serialized_reads = a.serialized;
    if (a.pairs == 0) throw UsageError("--pairs must be positive");

    CostModel model;
    if (a.kind == "all") {
        model = calibrate(*source, config);
    } else {
        const SpanKind kind = a.kind == "anon" ? SpanKind::Anonymous
                              : a.kind == "prim" ? SpanKind::Primordial
                                                 : SpanKind::Support;
        const auto samples = generate_span_pairs(*source, kind, config);
        model.source = source->descriptor();
        model.pairs_per_cost = config.pairs_per_cost;
        model.serialized_reads = config.serialized_reads;
        model.iqr_k = config.iqr_k;
        model.ic = estimate_inner_cost(samples, config.iqr_k);
        const auto oc = estimate_outer_cost(samples, model.ic.mean_cycles, config.iqr_k);
        (kind == SpanKind::Anonymous ? model.oc_anon : kind == SpanKind::Primordial ? model.oc_prim : model.oc_supp) =
            oc.estimate;
        model.warnings.push_back("only " + a.kind + " spans calibrated; IC pooled over that kind alone");
        if (oc.clamped) model.warnings.push_back("NegativeCost: outer cost clamped to 0");
    }
    write_cost_model(a.out, model);
    for (const auto& w : model.warnings) err << "warning: " << w << "\n";
    out << cost_model_to_json(model);
    return kExitOk;
}

int do_analyze(const AnalyzeArgs& a, bool verbose, std::ostream& err) {
    namespace fs = std::filesystem;
    const fs::path dir = a.traces;
    if (!fs::is_directory(dir)) throw IoFailure("trace directory " + a.traces + " does not exist");
    std::optional<fs::path> locations;
    if (!a.locations.empty()) {
        locations = a.locations;
    } else if (fs::exists(dir / "locations.tsv")) {
        locations = dir / "locations.tsv";
    }
    const auto costs = read_cost_model(a.costs);
    std::optional<BenchSummary> baseline;
    if (!a.baseline.empty()) {
        baseline = bench_summary_from_json(detail::read_text_file(a.baseline), a.baseline);
    }
    const auto profile = load_application_profile(dir, locations);
    if (verbose) {
        err << "reconstructed " << profile.all_spans.size() << " spans from " << profile.threads.size()
            << " threads\n";
    }
    const auto report = analyze_profile(profile, costs, baseline);
    write_report(a.out, report);
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
    return kExitOk;
}

int do_report(const ReportArgs& a, std::ostream& out, std::ostream& err) {
    auto report = read_report(a.in);
    {
        std::ofstream csv(a.heatmap, std::ios::binary | std::ios::trunc);
        if (!csv) throw IoFailure("cannot write " + a.heatmap);
        write_heatmap_csv(csv, report.heatmap);
        if (!csv.flush()) throw IoFailure("error writing " + a.heatmap);
    }
    if (!a.svg.empty()) {
        std::ofstream svg(a.svg, std::ios::binary | std::ios::trunc);
        if (!svg) throw IoFailure("cannot write " + a.svg);
        write_heatmap_svg(svg, report.heatmap);
        if (!svg.flush()) throw IoFailure("error writing " + a.svg);
    }

    json doc;
    doc["unit"] = report.source.unit_label();
    json hot = json::array();
    for (std::size_t i = 0; i < std::min(a.hot, report.locations.size()); ++i) {
        const auto& l = report.locations[i];
        hot.push_back({{"rank", i + 1},
                       {"method_id", l.method_id},
                       {"qualified_name", l.qualified_name},
                       {"span_count", l.span_count},
                       {"total_compensated_cycles", l.total_compensated_cycles},
                       {"share_of_total_spans", l.share_of_total_spans},
                       {"share_of_total_cycles", l.share_of_total_cycles}});
    }
    doc["hot_locations"] = std::move(hot);
    if (report.load_balance) {
        const auto lb =
            with_pool_size(*report.load_balance, a.pool_size > 0 ? std::optional(a.pool_size) : std::nullopt);
        doc["load_balance"] = {{"workers", lb.worker_count()}, {"padded_workers", lb.padded_workers}, {"cv", lb.cv},
                               {"task_count", lb.task_count}};
    } else {
        doc["load_balance"] = nullptr;
        if (a.pool_size > 0) err << "warning: --pool-size ignored, the profile has no parallel streams\n";
    }
    doc["evaluation"] = report.evaluation ? json{{"accuracy", report.evaluation->accuracy},
                                                 {"cps", report.evaluation->cps},
                                                 {"baseline_cycles", report.evaluation->baseline_cycles},
                                                 {"compensated_cycles", report.evaluation->compensated_cycles}}
                                          : json(nullptr);
    out << doc.dump(2) << "\n";
    return kExitOk;
}

int do_bench(BenchArgs a, bool verbose, std::ostream& out, std::ostream& err) {
    namespace fs = std::filesystem;
    const auto mode = parse_workload_mode(a.mode);
    if (!mode) throw UsageError("--mode must be seq, par or mixed");
    a.spec.mode = *mode;
    if (!a.nesting.empty()) {
        const auto n = parse_nesting_profile(a.nesting);
        if (!n) throw UsageError("--nesting must be flat, deep or flatmap");
        a.spec.nesting = *n;
    } else {
        a.spec.nesting = a.spec.depth > 1 ? NestingProfile::DeepRecursive : NestingProfile::Flat;
    }
    if (a.skew >= 0.0) a.spec.skew = a.skew;
    validate(a.spec);
    if (a.accuracy && a.costs.empty()) throw UsageError("--accuracy requires --costs");

    auto source = a.source.make(err, verbose);
    std::optional<CostModel> costs;
    if (!a.costs.empty()) {
        costs = read_cost_model(a.costs);
        if (costs->source) require_same_source(*costs->source, source->descriptor(), "cost model vs bench source");
    }

    const fs::path dir = a.out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + a.out + ": " + ec.message());

    BenchSummary summary;
    summary.spec = a.spec;
    summary.source = source->descriptor();
    summary.warmup = a.warmup;
    summary.iterations = a.iterations;
    summary.time_unit = source->descriptor().kind == CycleSourceKind::Scripted ? "virtual-seconds" : "seconds";

    RunOptions plain;
    plain.warmup = a.warmup;
    plain.iterations = a.iterations;
    for (const auto& it : run_workload(a.spec, *source, plain)) {
        summary.plain_seconds.push_back(it.seconds);
        summary.baseline_cycles.push_back(*it.baseline_cycles);
    }
    if (verbose) err << "baseline mean " << summary.baseline_mean() << " cycles\n";

    if (a.profile) {
        RunOptions profiled = plain;
        profiled.profiled = true;
        profiled.trace_root = dir / "traces";
        for (const auto& it : run_workload(a.spec, *source, profiled)) {
            summary.profiled_seconds.push_back(it.seconds);
            summary.trace_dirs.push_back(fs::relative(it.trace_dir, dir).generic_string());
        }
        if (!summary.plain_seconds.empty() &&
            std::all_of(summary.plain_seconds.begin(), summary.plain_seconds.end(), [](double s) { return s > 0; })) {
            summary.overhead = summarize_overhead(summary.profiled_seconds, summary.plain_seconds);
        }
    }
    if (a.accuracy) summary.accuracy = run_accuracy_experiment(a.spec, *source, *costs, a.runs, a.warmup);

    const auto text = bench_summary_to_json(summary);
    detail::write_text_file(dir / "bench.json", text);
    out << text;
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"spanprof: stream span profiler toolkit (calibrate, analyze, report, bench)", "spanprof"};
    app.require_subcommand(1);
    app.footer(
        "\nSubcommands:\n"
        "  spanprof calibrate --pairs N --out costs.json [--serialized-reads] [--kind anon|prim|supp|all]\n"
        "  spanprof analyze --traces DIR --locations FILE --costs FILE --out report.json [--baseline bench.json]\n"
        "  spanprof report --in report.json --heatmap out.csv [--svg out.svg] --hot-locations K [--pool-size P]\n"
        "  spanprof bench --workload NAME --mode seq|par|mixed --spans N --depth D --skew S --warmup W\n"
        "                 --iterations I [--profile --costs FILE] [--accuracy --runs R] --out DIR\n"
        "Cycle source for calibrate and bench: --source hw|clock|fake [--script 100,20,...] [--no-fallback].\n"
        "Every flag may also be set as SPANPROF_<FLAG> in the environment; command-line flags win.\n"
        "Exit codes: 0 ok, 1 usage, 2 malformed input, 3 I/O failure.");
    bool verbose = false;
    flag(&app, "-v,--verbose", verbose, "Progress messages on stderr");

    CalibrateArgs cal;
    auto* calibrate_cmd = app.add_subcommand("calibrate", "Estimate instrumentation cost constants");
    cal.source.attach(calibrate_cmd);
    option(calibrate_cmd, "--pairs", cal.pairs, "Span pairs per cost (full setting 10000000)")->capture_default_str();
    option(calibrate_cmd, "--out", cal.out, "Cost model JSON to write")->required();
    calibrate_cmd->add_flag("--serialized-reads,!--no-serialized-reads", cal.serialized,
                            "Serialize cycle reads while calibrating (default on)")
        ->envname("SPANPROF_SERIALIZED_READS");
    option(calibrate_cmd, "--kind", cal.kind, "Which span kind to calibrate")
        ->check(CLI::IsMember({"anon", "prim", "supp", "all"}))
        ->capture_default_str();

    AnalyzeArgs an;
    auto* analyze_cmd = app.add_subcommand("analyze", "Reconstruct traces and write an analysis report");
    option(analyze_cmd, "--traces", an.traces, "Directory holding trace-*.sptr files")->required();
    option(analyze_cmd, "--locations", an.locations, "Location file (default: <traces>/locations.tsv)");
    option(analyze_cmd, "--costs", an.costs, "Cost model JSON")->required();
    option(analyze_cmd, "--out", an.out, "Report JSON to write")->required();
    option(analyze_cmd, "--baseline", an.baseline, "bench.json with baseline cycles for evaluation");

    ReportArgs rep;
    auto* report_cmd = app.add_subcommand("report", "Render heatmap and hot locations from a report");
    option(report_cmd, "--in", rep.in, "Report JSON")->required();
    option(report_cmd, "--heatmap", rep.heatmap, "Heatmap CSV to write")->required();
    option(report_cmd, "--svg", rep.svg, "Heatmap SVG to write");
    option(report_cmd, "--hot-locations", rep.hot, "Number of hot locations to print")->capture_default_str();
    option(report_cmd, "--pool-size", rep.pool_size, "Worker pool size, counting idle workers in the CV");

    BenchArgs b;
    auto* bench_cmd = app.add_subcommand("bench", "Run a synthetic workload");
    b.source.attach(bench_cmd);
    option(bench_cmd, "--workload", b.spec.name, "Workload name")->capture_default_str();
    option(bench_cmd, "--mode", b.mode, "seq, par or mixed")->capture_default_str();
    option(bench_cmd, "--spans", b.spec.span_count, "Spans per iteration")->capture_default_str();
    option(bench_cmd, "--depth", b.spec.depth, "Chain length (deep) or fan-out (flatmap)")->capture_default_str();
    option(bench_cmd, "--nesting", b.nesting, "flat, deep or flatmap (default: deep when --depth > 1)");
    option(bench_cmd, "--skew", b.skew, "Share of top-level parallel work moved to the first task, in [0,1]");
    option(bench_cmd, "--cps", b.spec.target_cps, "Work units burned per span")->capture_default_str();
    option(bench_cmd, "--jitter", b.spec.jitter, "Relative per-span work jitter, in [0,1)")->capture_default_str();
    option(bench_cmd, "--workers", b.spec.workers, "Worker threads for parallel streams")->capture_default_str();
    option(bench_cmd, "--seed", b.spec.seed, "Seed for randomized workload parameters")->capture_default_str();
    option(bench_cmd, "--warmup", b.warmup, "Unmeasured warm-up iterations")->capture_default_str();
    option(bench_cmd, "--iterations", b.iterations, "Measured iterations")->capture_default_str();
    flag(bench_cmd, "--profile", b.profile, "Also run profiled iterations and write their traces");
    option(bench_cmd, "--costs", b.costs, "Cost model JSON (needed by --accuracy)");
    flag(bench_cmd, "--accuracy", b.accuracy, "Run the accuracy experiment");
    option(bench_cmd, "--runs", b.runs, "Accuracy experiment runs")->capture_default_str();
    option(bench_cmd, "--out", b.out, "Output directory")->required();

    try {
        app.parse(std::vector<std::string>(args.rbegin(), args.rend()));
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*calibrate_cmd) return do_calibrate(cal, verbose, out, err);
        if (*analyze_cmd) return do_analyze(an, verbose, err);
        if (*report_cmd) return do_report(rep, out, err);
        if (*bench_cmd) return do_bench(b, verbose, out, err);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UnsupportedPlatform& e) {
        err << "unsupported platform: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoFailure& e) {
        err << "I/O failure: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        // Malformed traces, mixed sources, duplicate primordials, cyclic
        // nesting and degenerate data all mean the input cannot be analyzed.
        err << "error: " << e.what() << "\n";
        return kExitMalformed;
    }
    return kExitUsage;
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run_cli(args, out, err);
}

}  // namespace spanprof

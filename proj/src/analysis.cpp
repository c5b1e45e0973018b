#include "spanprof/analysis.hpp"

#include "spanprof/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_map>

namespace spanprof {

std::vector<LocationAggregate> aggregate_locations(const ApplicationProfile& profile, const CostModel& costs) {
    struct Acc {
        std::size_t spans = 0;
        ExactSum cycles;
    };
    std::unordered_map<MethodId, Acc> acc;
    ExactSum total;
    for (const auto& span : profile.all_spans) {
        const double c = compensated_cycles(span, costs);
        auto& a = acc[span.method_id];
        ++a.spans;
        a.cycles.add(c);
        total.add(c);
    }
    const double total_cycles = total.value();
    const double total_spans = static_cast<double>(profile.all_spans.size());

    std::vector<LocationAggregate> out;
    out.reserve(acc.size());
    for (const auto& [id, a] : acc) {
        LocationAggregate agg;
        agg.method_id = id;
        agg.qualified_name = profile.location_name(id);
        agg.span_count = a.spans;
        agg.total_compensated_cycles = a.cycles.value();
        agg.share_of_total_spans = static_cast<double>(a.spans) / total_spans;
        agg.share_of_total_cycles = total_cycles > 0.0 ? agg.total_compensated_cycles / total_cycles : 0.0;
        out.push_back(std::move(agg));
    }
    std::sort(out.begin(), out.end(), [](const LocationAggregate& a, const LocationAggregate& b) {
        if (a.total_compensated_cycles != b.total_compensated_cycles) {
            return a.total_compensated_cycles > b.total_compensated_cycles;
        }
        if (a.span_count != b.span_count) return a.span_count > b.span_count;
        return a.method_id < b.method_id;
    });
    return out;
}

std::vector<LocationAggregate> hot_locations(const ApplicationProfile& profile, const CostModel& costs,
                                             std::size_t k) {
    auto all = aggregate_locations(profile, costs);
    if (all.size() > k) all.resize(k);
    return all;
}

const std::array<double, kCycleBuckets>& cycle_bucket_edges() noexcept {
    static const std::array<double, kCycleBuckets> edges = [] {
        std::array<double, kCycleBuckets> e{};
        double edge = 1.0;
        for (std::size_t i = 1; i < kCycleBuckets; ++i) {
            edge *= 10.0;
            e[i] = edge;
        }
        return e;
    }();
    return edges;
}

std::size_t cycle_bucket(double cycles) noexcept {
    const auto& edges = cycle_bucket_edges();
    std::size_t bucket = 0;
    while (bucket + 1 < kCycleBuckets && cycles >= edges[bucket + 1]) ++bucket;
    return bucket;
}

void HeatmapMatrix::ensure_group(std::size_t group) {
    if (group < counts_.size()) return;
    counts_.resize(group + 1, std::array<std::uint64_t, kCycleBuckets>{});
    cycles_.resize(group + 1);
}

void HeatmapMatrix::add(int nesting_level, double cycles) {
    const auto group = static_cast<std::size_t>(std::max(nesting_level, 0) / kNestingGroupWidth);
    const auto bucket = cycle_bucket(cycles);
    ensure_group(group);
    ++counts_[group][bucket];
    cycles_[group][bucket].add(cycles);
}

std::uint64_t HeatmapMatrix::total_count() const noexcept {
    std::uint64_t total = 0;
    for (const auto& row : counts_) {
        for (const auto c : row) total += c;
    }
    return total;
}

double HeatmapMatrix::total_cycles() const {
    ExactSum total;
    for (const auto& row : cycles_) {
        for (const auto& cell : row) total.add(cell);
    }
    return total.value();
}

HeatmapMatrix HeatmapMatrix::from_cells(const std::vector<std::vector<std::uint64_t>>& counts,
                                        const std::vector<std::vector<double>>& cycles) {
    if (counts.size() != cycles.size()) throw MalformedInput("heatmap count and cycle rows differ");
    HeatmapMatrix m;
    for (std::size_t g = 0; g < counts.size(); ++g) {
        if (counts[g].size() != kCycleBuckets || cycles[g].size() != kCycleBuckets) {
            throw MalformedInput("heatmap row " + std::to_string(g) + " does not have " +
                                 std::to_string(kCycleBuckets) + " buckets");
        }
        m.ensure_group(g);
        for (std::size_t b = 0; b < kCycleBuckets; ++b) {
            m.counts_[g][b] = counts[g][b];
            m.cycles_[g][b].add(cycles[g][b]);
        }
    }
    return m;
}

HeatmapMatrix build_heatmap(const ApplicationProfile& profile, const CostModel& costs) {
    HeatmapMatrix m;
    for (const auto& span : profile.all_spans) m.add(span.nesting_level, compensated_cycles(span, costs));
    return m;
}

namespace {

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string bucket_label(std::size_t b) {
    const auto& edges = cycle_bucket_edges();
    const auto edge = [](double e) { return std::to_string(static_cast<std::uint64_t>(e)); };
    const auto lo = edge(edges[b]);
    const auto hi = b + 1 < kCycleBuckets ? edge(edges[b + 1]) : std::string("inf");
    return "[" + lo + "," + hi + ")";
}

std::string group_label(std::size_t g) {
    const auto lo = g * kNestingGroupWidth;
    return std::to_string(lo) + "-" + std::to_string(lo + kNestingGroupWidth - 1);
}

}  // namespace

void write_heatmap_csv(std::ostream& out, const HeatmapMatrix& heatmap) {
    out << "nesting_group";
    for (std::size_t b = 0; b < kCycleBuckets; ++b) out << ",\"" << bucket_label(b) << "\"";
    out << "\n";
    for (std::size_t g = 0; g < heatmap.groups(); ++g) {
        out << group_label(g);
        for (std::size_t b = 0; b < kCycleBuckets; ++b) {
            out << "," << heatmap.count(g, b) << ":" << format_number(heatmap.cycles(g, b));
        }
        out << "\n";
    }
}

void write_heatmap_svg(std::ostream& out, const HeatmapMatrix& heatmap) {
    constexpr int cell_w = 64, cell_h = 28, left = 70, top = 30, bottom = 60;
    const int rows = static_cast<int>(heatmap.groups());
    const int width = left + cell_w * static_cast<int>(kCycleBuckets) + 10;
    const int height = top + cell_h * std::max(rows, 1) + bottom;

    double max_cycles = 0.0;
    for (std::size_t g = 0; g < heatmap.groups(); ++g) {
        for (std::size_t b = 0; b < kCycleBuckets; ++b) max_cycles = std::max(max_cycles, heatmap.cycles(g, b));
    }

    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    out << "<text x=\"" << left << "\" y=\"16\">spans by nesting level and compensated cycles</text>\n";
    for (int r = 0; r < rows; ++r) {
        // Deepest group at the top.
        const auto g = static_cast<std::size_t>(rows - 1 - r);
        const int y = top + r * cell_h;
        out << "<text x=\"4\" y=\"" << y + cell_h / 2 + 4 << "\">" << group_label(g) << "</text>\n";
        for (std::size_t b = 0; b < kCycleBuckets; ++b) {
            const double c = heatmap.cycles(g, b);
            const double t = max_cycles > 0.0 ? std::log1p(c) / std::log1p(max_cycles) : 0.0;
            const int shade = 255 - static_cast<int>(std::lround(t * 235.0));
            const int x = left + static_cast<int>(b) * cell_w;
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\"" << cell_h
                << "\" fill=\"rgb(" << shade << "," << shade << "," << shade << ")\" stroke=\"#999\"><title>"
                << heatmap.count(g, b) << " spans, " << format_number(c) << " cycles</title></rect>\n";
            if (heatmap.count(g, b) > 0) {
                out << "<text x=\"" << x + 4 << "\" y=\"" << y + cell_h / 2 + 4 << "\" fill=\""
                    << (shade < 128 ? "#fff" : "#000") << "\">" << heatmap.count(g, b) << "</text>\n";
            }
        }
    }
    const int axis_y = top + cell_h * std::max(rows, 1) + 14;
    for (std::size_t b = 0; b < kCycleBuckets; ++b) {
        out << "<text x=\"" << left + static_cast<int>(b) * cell_w + 2 << "\" y=\"" << axis_y << "\">"
            << bucket_label(b) << "</text>\n";
    }
    out << "<text x=\"" << left << "\" y=\"" << axis_y + 20 << "\">compensated cycles (decades)</text>\n";
    out << "</svg>\n";
}

double load_balance_cv(std::span<const double> per_worker_cycles, std::size_t pool_size) {
    if (pool_size != 0 && pool_size < per_worker_cycles.size()) {
        throw UsageError("pool size " + std::to_string(pool_size) + " is smaller than the " +
                         std::to_string(per_worker_cycles.size()) + " workers seen in the traces");
    }
    std::vector<double> values(per_worker_cycles.begin(), per_worker_cycles.end());
    if (pool_size > values.size()) values.resize(pool_size, 0.0);
    return coefficient_of_variation(values);
}

LoadBalanceReport with_pool_size(LoadBalanceReport report, std::optional<std::size_t> pool_size) {
    std::vector<double> values;
    values.reserve(report.per_worker_cycles.size());
    for (const auto& [tid, c] : report.per_worker_cycles) values.push_back(c);
    const std::size_t pool = pool_size.value_or(0);
    report.cv = load_balance_cv(values, pool);
    report.padded_workers = pool > values.size() ? pool - values.size() : 0;
    return report;
}

LoadBalanceReport load_balance(const ApplicationProfile& profile, const CostModel& costs,
                               std::optional<std::size_t> pool_size) {
    LoadBalanceReport report;
    std::map<ThreadId, ExactSum> sums;
    for (const auto& span : profile.all_spans) {
        if (!span.is_named()) continue;
        sums[span.thread_id].add(compensated_cycles(span, costs));
        ++report.task_count;
    }
    if (report.task_count == 0) throw NoParallelWork("profile contains no named spans");
    for (const auto& [tid, s] : sums) report.per_worker_cycles[tid] = s.value();
    return with_pool_size(std::move(report), pool_size);
}

double evaluate_accuracy(double profile_total, double baseline_total) {
    if (baseline_total == 0.0) throw ZeroBaseline("baseline cycles are zero");
    return 1.0 - std::fabs(profile_total - baseline_total) / baseline_total;
}

double evaluate_overhead(double time_profiled, double time_plain) {
    if (time_plain == 0.0) throw ZeroDenominator("plain execution time is zero");
    return time_profiled / time_plain;
}

double cycles_per_span(double total_cycles, std::size_t span_count) {
    if (span_count == 0) throw ZeroDenominator("no spans to divide cycles by");
    return total_cycles / static_cast<double>(span_count);
}

EvaluationRecord evaluate(double baseline_total, double compensated_total, std::size_t span_count) {
    EvaluationRecord r;
    r.baseline_cycles = baseline_total;
    r.compensated_cycles = compensated_total;
    r.accuracy = evaluate_accuracy(compensated_total, baseline_total);
    r.cps = cycles_per_span(baseline_total, span_count);
    return r;
}

OverheadSummary summarize_overhead(std::span<const double> profiled_seconds, std::span<const double> plain_seconds,
                                   double level) {
    if (profiled_seconds.size() != plain_seconds.size() || profiled_seconds.empty()) {
        throw UsageError("overhead needs the same non-zero number of profiled and plain runs");
    }
    std::vector<double> ratios;
    ratios.reserve(profiled_seconds.size());
    for (std::size_t i = 0; i < profiled_seconds.size(); ++i) {
        ratios.push_back(evaluate_overhead(profiled_seconds[i], plain_seconds[i]));
    }
    OverheadSummary s;
    s.factor = evaluate_overhead(mean(profiled_seconds), mean(plain_seconds));
    s.ratio_ci = mean_confidence_interval(ratios, level);
    s.pairs = ratios.size();
    return s;
}

double correlation(std::span<const double> xs, std::span<const double> ys) { return pearson(xs, ys); }

}  // namespace spanprof

#include "spanprof/cost_model.hpp"

#include "json_util.hpp"

#include <fstream>
#include <sstream>

namespace spanprof {

namespace detail {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoFailure("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoFailure("error reading " + path.string());
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + path.string());
    out << text;
    out.flush();
    if (!out) throw IoFailure("error writing " + path.string());
}

}  // namespace detail

using detail::json;

CostModel CostModel::zero() { return constants(0, 0, 0, 0); }

CostModel CostModel::constants(double ic, double oc_anon, double oc_prim, double oc_supp) {
    CostModel m;
    m.ic.mean_cycles = ic;
    m.oc_anon.mean_cycles = oc_anon;
    m.oc_prim.mean_cycles = oc_prim;
    m.oc_supp.mean_cycles = oc_supp;
    return m;
}

namespace {

json estimate_to_json(const CostEstimate& e) {
    return json{{"mean_cycles", e.mean_cycles},
                {"cv", e.cv},
                {"samples_kept", e.samples_kept},
                {"samples_total", e.samples_total}};
}

CostEstimate estimate_from_json(const json& j) {
    CostEstimate e;
    e.mean_cycles = j.at("mean_cycles").get<double>();
    e.cv = j.at("cv").get<double>();
    e.samples_kept = j.at("samples_kept").get<std::uint64_t>();
    e.samples_total = j.at("samples_total").get<std::uint64_t>();
    return e;
}

}  // namespace

std::string cost_model_to_json(const CostModel& model) {
    json j;
    j["format_version"] = kCostModelFormatVersion;
    j["source"] = model.source ? detail::descriptor_to_json(*model.source) : json(nullptr);
    j["pairs_per_cost"] = model.pairs_per_cost;
    j["config"] = {{"serialized_reads", model.serialized_reads},
                   {"outlier_policy", {{"method", "tukey_iqr"}, {"k", model.iqr_k}}},
                   {"support_mode", model.support_mode}};
    j["costs"] = {{"ic", estimate_to_json(model.ic)},
                  {"oc_anon", estimate_to_json(model.oc_anon)},
                  {"oc_prim", estimate_to_json(model.oc_prim)},
                  {"oc_supp", estimate_to_json(model.oc_supp)}};
    j["warnings"] = model.warnings;
    return j.dump(2) + "\n";
}

CostModel cost_model_from_json(const std::string& text, const std::string& origin) {
    return detail::parse_json_document(text, origin, [&](const json& j) {
        if (j.at("format_version").get<int>() != kCostModelFormatVersion) {
            throw MalformedInput(origin + ": unsupported cost model format_version");
        }
        CostModel m;
        if (!j.at("source").is_null()) m.source = detail::descriptor_from_json(j.at("source"));
        m.pairs_per_cost = j.at("pairs_per_cost").get<std::uint64_t>();
        if (j.contains("config")) {
            const auto& c = j.at("config");
            m.serialized_reads = c.value("serialized_reads", false);
            if (c.contains("outlier_policy")) m.iqr_k = c.at("outlier_policy").value("k", 1.5);
            m.support_mode = c.value("support_mode", m.support_mode);
        }
        const auto& costs = j.at("costs");
        m.ic = estimate_from_json(costs.at("ic"));
        m.oc_anon = estimate_from_json(costs.at("oc_anon"));
        m.oc_prim = estimate_from_json(costs.at("oc_prim"));
        m.oc_supp = estimate_from_json(costs.at("oc_supp"));
        for (const auto* e : {&m.ic, &m.oc_anon, &m.oc_prim, &m.oc_supp}) {
            if (!(e->mean_cycles >= 0.0)) throw MalformedInput(origin + ": costs must be non-negative");
        }
        if (j.contains("warnings")) m.warnings = j.at("warnings").get<std::vector<std::string>>();
        return m;
    });
}

void write_cost_model(const std::filesystem::path& path, const CostModel& model) {
    detail::write_text_file(path, cost_model_to_json(model));
}

CostModel read_cost_model(const std::filesystem::path& path) {
    return cost_model_from_json(detail::read_text_file(path), path.string());
}

}  // namespace spanprof

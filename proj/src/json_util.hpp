#pragma once

#include "spanprof/cycle_source.hpp"
#include "spanprof/errors.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace spanprof::detail {

using json = nlohmann::ordered_json;

inline json descriptor_to_json(const CycleSourceDescriptor& d) {
    json j;
    j["kind"] = to_string(d.kind);
    j["nominal_frequency_hz"] = d.nominal_frequency_hz ? json(*d.nominal_frequency_hz) : json(nullptr);
    j["platform_label"] = d.platform_label;
    j["unit"] = d.unit_label();
    return j;
}

inline CycleSourceDescriptor descriptor_from_json(const json& j) {
    CycleSourceDescriptor d;
    const auto kind = parse_cycle_source_kind(j.at("kind").get<std::string>());
    if (!kind) throw MalformedInput("unknown cycle source kind " + j.at("kind").dump());
    d.kind = *kind;
    if (j.contains("nominal_frequency_hz") && !j.at("nominal_frequency_hz").is_null()) {
        d.nominal_frequency_hz = j.at("nominal_frequency_hz").get<std::uint64_t>();
    }
    d.platform_label = j.value("platform_label", "");
    return d;
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

// Parses JSON, turning parse and schema errors into MalformedInput.
template <typename Fn>
auto parse_json_document(const std::string& text, const std::string& origin, Fn&& fn) {
    try {
        return fn(json::parse(text));
    } catch (const json::exception& e) {
        throw MalformedInput(origin + ": " + e.what());
    }
}

}  // namespace spanprof::detail

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridweaver/csv.hpp"
#include "gridweaver/geo.hpp"

namespace gridweaver {

enum class GeoDialect { worldbank, osm };

inline GeoDialect parse_dialect(std::string_view name) {
    if (name == "worldbank") return GeoDialect::worldbank;
    if (name == "osm") return GeoDialect::osm;
    throw ConfigError("unknown geodata dialect: " + std::string(name));
}

/// Attribute keys looked up in feature properties. Defaults match both
/// bundled dialects; override per dataset when keys differ.
struct AttributeKeys {
    std::string voltage = "voltage";
    std::string circuits = "circuits";
    std::string status = "status";
    std::string country = "country";
    std::string id = "id";
};

enum class LineStatus { existing, planned };

inline std::string to_string(LineStatus s) { return s == LineStatus::existing ? "existing" : "planned"; }

inline LineStatus parse_line_status(std::string_view s) {
    const std::string v = lower(s);
    if (v == "planned" || v == "construction" || v == "proposed") return LineStatus::planned;
    return LineStatus::existing;
}

struct RawSubstation {
    std::string id;
    LonLat location;
    std::optional<double> voltage_kv;
    std::string country;  // ISO-3166 alpha-2, may be empty
    GeoDialect source = GeoDialect::worldbank;
};

struct RawLine {
    std::string id;
    std::vector<LonLat> path;
    std::optional<double> voltage_kv;
    int circuits = 1;
    LineStatus status = LineStatus::existing;
};

struct SkippedFeature {
    std::size_t feature_index;
    std::string reason;
};

struct IngestReport {
    std::vector<SkippedFeature> skipped;

    std::string to_csv() const {
        CsvWriter w({"feature_index", "reason"});
        for (const auto& s : skipped) w.row({std::to_string(s.feature_index), s.reason});
        return w.str();
    }
};

/// Normalize a single voltage token. Open datasets mix volts and
/// kilovolts; values >= 1000 are treated as volts, smaller ones as kV
/// already. Idempotent on kV values.
inline std::optional<double> normalize_voltage_kv(double raw) {
    if (raw <= 0) return std::nullopt;
    return raw >= 1000.0 ? raw / 1000.0 : raw;
}

/// Parse a voltage tag. Multi-valued tags ("220;132") resolve to the
/// maximum: the highest system voltage governs the parameter class.
inline std::optional<double> parse_voltage_tag(std::string_view tag) {
    std::optional<double> best;
    for (const std::string& tok : split(tag, ';')) {
        const auto v = parse_double(trim(tok));
        if (!v) continue;
        const auto kv = normalize_voltage_kv(*v);
        if (kv && (!best || *kv > *best)) best = kv;
    }
    return best;
}

namespace detail {

inline std::optional<double> property_voltage(const nlohmann::json& props, const AttributeKeys& keys) {
    if (!props.contains(keys.voltage)) return std::nullopt;
    const auto& v = props.at(keys.voltage);
    if (v.is_number()) return normalize_voltage_kv(v.get<double>());
    if (v.is_string()) return parse_voltage_tag(v.get<std::string>());
    return std::nullopt;
}

inline std::string property_string(const nlohmann::json& props, const std::string& key) {
    if (!props.contains(key)) return {};
    const auto& v = props.at(key);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    return {};
}

inline const nlohmann::json& feature_collection(const nlohmann::json& doc) {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
        throw ParseError("document is not a GeoJSON FeatureCollection");
    return doc.at("features");
}

inline nlohmann::json parse_geojson(std::string_view text) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed GeoJSON: ") + e.what());
    }
}

inline LonLat coord_pair(const nlohmann::json& c, std::size_t feature_index) {
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number())
        throw ParseError("feature " + std::to_string(feature_index) + ": malformed coordinate");
    LonLat p{c[0].get<double>(), c[1].get<double>()};
    if (p.lon < -180 || p.lon > 180 || p.lat < -90 || p.lat > 90)
        throw ParseError("feature " + std::to_string(feature_index) + ": coordinate out of range");
    return p;
}

}  // namespace detail

/// Parse substations from a GeoJSON FeatureCollection of points.
/// Non-point features are skipped and recorded in the report.
inline std::vector<RawSubstation> parse_substations(std::string_view geojson_text, GeoDialect dialect,
                                                    IngestReport* report = nullptr,
                                                    const AttributeKeys& keys = {}) {
    const nlohmann::json doc = detail::parse_geojson(geojson_text);
    const nlohmann::json& features = detail::feature_collection(doc);

    std::vector<RawSubstation> out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        const auto geom = f.find("geometry");
        if (geom == f.end() || geom->is_null() || geom->value("type", "") != "Point") {
            if (report) report->skipped.push_back({i, "not a point geometry"});
            continue;
        }
        if (!geom->contains("coordinates"))
            throw ParseError("feature " + std::to_string(i) + ": point without coordinates");

        RawSubstation s;
        s.location = detail::coord_pair(geom->at("coordinates"), i);
        s.source = dialect;
        const nlohmann::json props = f.value("properties", nlohmann::json::object());
        s.id = detail::property_string(props, keys.id);
        if (s.id.empty()) s.id = "sub_" + std::to_string(i);
        s.voltage_kv = detail::property_voltage(props, keys);
        s.country = detail::property_string(props, keys.country);
        out.push_back(std::move(s));
    }
    return out;
}

/// Parse transmission lines from a GeoJSON FeatureCollection of
/// linestrings. Repeated consecutive vertices are dropped; paths left
/// with fewer than 2 vertices are skipped and recorded.
inline std::vector<RawLine> parse_lines(std::string_view geojson_text, GeoDialect dialect,
                                        IngestReport* report = nullptr, const AttributeKeys& keys = {}) {
    (void)dialect;
    const nlohmann::json doc = detail::parse_geojson(geojson_text);
    const nlohmann::json& features = detail::feature_collection(doc);

    std::vector<RawLine> out;
    out.reserve(features.size());
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        const auto geom = f.find("geometry");
        if (geom == f.end() || geom->is_null() || geom->value("type", "") != "LineString") {
            if (report) report->skipped.push_back({i, "not a linestring geometry"});
            continue;
        }
        if (!geom->contains("coordinates"))
            throw ParseError("feature " + std::to_string(i) + ": linestring without coordinates");

        RawLine line;
        for (const auto& c : geom->at("coordinates")) {
            LonLat p = detail::coord_pair(c, i);
            if (!line.path.empty() && line.path.back() == p) continue;
            line.path.push_back(p);
        }
        if (line.path.size() < 2) {
            if (report) report->skipped.push_back({i, "degenerate geometry"});
            continue;
        }

        const nlohmann::json props = f.value("properties", nlohmann::json::object());
        line.id = detail::property_string(props, keys.id);
        if (line.id.empty()) line.id = "line_" + std::to_string(i);
        line.voltage_kv = detail::property_voltage(props, keys);
        if (props.contains(keys.circuits)) {
            const auto& c = props.at(keys.circuits);
            long long n = 0;
            if (c.is_number()) n = c.get<long long>();
            else if (c.is_string()) n = parse_int(c.get<std::string>()).value_or(0);
            if (n >= 1) line.circuits = static_cast<int>(n);
        }
        if (props.contains(keys.status) && props.at(keys.status).is_string())
            line.status = parse_line_status(props.at(keys.status).get<std::string>());
        out.push_back(std::move(line));
    }
    return out;
}

struct FilterReport {
    std::size_t kept = 0;
    std::size_t dropped_below_threshold = 0;
    std::size_t dropped_missing_voltage = 0;
    std::size_t kept_missing_voltage = 0;
    std::vector<SkippedFeature> dropped;  // index into the input list

    std::string to_csv() const {
        CsvWriter w({"feature_index", "reason"});
        for (const auto& s : dropped) w.row({std::to_string(s.feature_index), s.reason});
        return w.str();
    }
};

/// Keep records at or above the transmission voltage threshold.
/// Records without a voltage are dropped unless keep_missing is set;
/// either way they are tallied separately in the report.
template <class Asset>
std::vector<Asset> filter_transmission(const std::vector<Asset>& assets, double threshold_kv,
                                       FilterReport* report = nullptr, bool keep_missing = false) {
    if (threshold_kv <= 0) throw ContractError("filter_transmission: threshold must be positive");
    std::vector<Asset> out;
    out.reserve(assets.size());
    for (std::size_t i = 0; i < assets.size(); ++i) {
        const Asset& a = assets[i];
        if (!a.voltage_kv) {
            if (keep_missing) {
                out.push_back(a);
                if (report) ++report->kept_missing_voltage;
            } else if (report) {
                ++report->dropped_missing_voltage;
                report->dropped.push_back({i, "missing voltage"});
            }
            continue;
        }
        if (*a.voltage_kv >= threshold_kv) {
            out.push_back(a);
            if (report) ++report->kept;
        } else if (report) {
            ++report->dropped_below_threshold;
            report->dropped.push_back({i, "below threshold"});
        }
    }
    return out;
}

}  // namespace gridweaver

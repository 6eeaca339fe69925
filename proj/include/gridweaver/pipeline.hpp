#pragma once

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridweaver/eligibility.hpp"
#include "gridweaver/expansion.hpp"
#include "gridweaver/ingest.hpp"
#include "gridweaver/mps.hpp"
#include "gridweaver/network.hpp"
#include "gridweaver/plants.hpp"
#include "gridweaver/profiles.hpp"
#include "gridweaver/regions.hpp"
#include "gridweaver/svgmap.hpp"

namespace gridweaver {

enum class Stage { ingest, build, cluster, profiles, eligibility, optimize, report };

inline const std::vector<Stage>& stage_order() {
    static const std::vector<Stage> order{Stage::ingest,      Stage::build,    Stage::cluster,
                                          Stage::profiles,    Stage::eligibility,
                                          Stage::optimize,    Stage::report};
    return order;
}

inline std::string to_string(Stage s) {
    switch (s) {
        case Stage::ingest: return "ingest";
        case Stage::build: return "build";
        case Stage::cluster: return "cluster";
        case Stage::profiles: return "profiles";
        case Stage::eligibility: return "eligibility";
        case Stage::optimize: return "optimize";
        case Stage::report: return "report";
    }
    return "unknown";
}

inline Stage parse_stage(std::string_view name) {
    for (Stage s : stage_order())
        if (to_string(s) == name) return s;
    throw ConfigError("unknown stage: " + std::string(name) +
                      " (expected ingest|build|cluster|profiles|eligibility|optimize|report)");
}

/// One declarative document drives the whole run; sections mirror the
/// module names. Unknown keys are rejected to catch typos early.
struct PipelineConfig {
    // paths
    std::string substations_path;
    std::string lines_path;
    std::vector<std::string> plants_paths;  // 1 database, or 2 to be matched
    std::string weather_path;
    std::map<RasterKind, std::string> raster_paths;
    double raster_spacing_deg = 0.1;
    std::string country_shapes_path;
    std::string output_dir = "out";

    // ingest
    GeoDialect dialect = GeoDialect::worldbank;
    AttributeKeys attribute_keys;
    double voltage_threshold_kv = 110.0;
    bool keep_missing_voltage = false;

    // topology
    SnapOptions snap;
    LineParamTable line_params = default_line_params();

    // regions
    int clusters_k = 0;  // 0: one per country
    std::uint64_t seed = 42;

    // plants
    MatchOptions match;

    // profiles
    std::map<std::string, double> annual_twh;  // per country
    DemandShape demand_shape = DemandShape::flat();
    int start_weekday = 0;
    double hub_height_m = 100.0;
    TurbineCurve turbine;
    double solar_temp_coeff = -0.004;
    double hydro_availability = 0.45;

    // eligibility
    ExclusionRuleSet wind_rules;
    ExclusionRuleSet solar_rules;
    double wind_density_mw_km2 = 3.0;
    double solar_density_mw_km2 = 1.7;
    double battery_potential_mw = 0.0;
    int battery_every_nth = 1;  // place storage at every n-th cluster

    // expansion
    CostTable costs = default_tech_costs();
    std::optional<double> co2_cap_t;
    SnapshotSpec snapshots{168, 1, 0};
    ExpansionOptions expansion;

    std::string raw_json;  // normalized config document, hashed for the manifest
};

namespace pipedetail {

using nlohmann::json;

inline void check_keys(const json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

inline ExclusionRuleSet parse_rules(const json& j, const std::string& where) {
    check_keys(j, {"excluded_landcover_codes", "protected_excluded", "max_population_density",
                   "max_water_depth_m", "buffer_km"},
               where);
    ExclusionRuleSet r;
    if (j.contains("excluded_landcover_codes"))
        for (const auto& c : j.at("excluded_landcover_codes")) r.excluded_landcover_codes.insert(c.get<int>());
    r.protected_excluded = j.value("protected_excluded", false);
    if (j.contains("max_population_density") && !j.at("max_population_density").is_null())
        r.max_population_density = j.at("max_population_density").get<double>();
    if (j.contains("max_water_depth_m") && !j.at("max_water_depth_m").is_null())
        r.max_water_depth_m = j.at("max_water_depth_m").get<double>();
    r.buffer_km = j.value("buffer_km", 0.0);
    r.validate();
    return r;
}

}  // namespace pipedetail

inline PipelineConfig parse_config(const std::string& text, const std::string& config_dir = "") {
    using nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    pipedetail::check_keys(doc,
                           {"paths", "ingest", "topology", "regions", "plants", "profiles",
                            "eligibility", "expansion"},
                           "top level");

    PipelineConfig cfg;
    auto resolve = [&](const std::string& p) -> std::string {
        if (p.empty() || config_dir.empty()) return p;
        const std::filesystem::path path(p);
        return path.is_absolute() ? p : (std::filesystem::path(config_dir) / path).string();
    };

    if (doc.contains("paths")) {
        const json& p = doc.at("paths");
        pipedetail::check_keys(p,
                               {"substations", "lines", "plants", "weather", "rasters",
                                "raster_spacing_deg", "country_shapes", "output_dir"},
                               "paths");
        cfg.substations_path = resolve(p.value("substations", ""));
        cfg.lines_path = resolve(p.value("lines", ""));
        if (p.contains("plants")) {
            if (p.at("plants").is_array())
                for (const auto& q : p.at("plants")) cfg.plants_paths.push_back(resolve(q.get<std::string>()));
            else
                cfg.plants_paths.push_back(resolve(p.at("plants").get<std::string>()));
        }
        cfg.weather_path = resolve(p.value("weather", ""));
        if (p.contains("rasters")) {
            const json& r = p.at("rasters");
            pipedetail::check_keys(r, {"landcover", "protected", "population", "elevation"},
                                   "paths.rasters");
            if (r.contains("landcover"))
                cfg.raster_paths[RasterKind::landcover] = resolve(r.at("landcover").get<std::string>());
            if (r.contains("protected"))
                cfg.raster_paths[RasterKind::protected_area] = resolve(r.at("protected").get<std::string>());
            if (r.contains("population"))
                cfg.raster_paths[RasterKind::population_density] =
                    resolve(r.at("population").get<std::string>());
            if (r.contains("elevation"))
                cfg.raster_paths[RasterKind::elevation] = resolve(r.at("elevation").get<std::string>());
        }
        cfg.raster_spacing_deg = p.value("raster_spacing_deg", 0.1);
        cfg.country_shapes_path = resolve(p.value("country_shapes", ""));
        cfg.output_dir = resolve(p.value("output_dir", "out"));
    }

    if (doc.contains("ingest")) {
        const json& j = doc.at("ingest");
        pipedetail::check_keys(
            j, {"dialect", "voltage_threshold_kv", "keep_missing_voltage", "attribute_keys"},
            "ingest");
        cfg.dialect = parse_dialect(j.value("dialect", "worldbank"));
        cfg.voltage_threshold_kv = j.value("voltage_threshold_kv", 110.0);
        cfg.keep_missing_voltage = j.value("keep_missing_voltage", false);
        if (j.contains("attribute_keys")) {
            const json& k = j.at("attribute_keys");
            pipedetail::check_keys(k, {"voltage", "circuits", "status", "country", "id"},
                                   "ingest.attribute_keys");
            cfg.attribute_keys.voltage = k.value("voltage", cfg.attribute_keys.voltage);
            cfg.attribute_keys.circuits = k.value("circuits", cfg.attribute_keys.circuits);
            cfg.attribute_keys.status = k.value("status", cfg.attribute_keys.status);
            cfg.attribute_keys.country = k.value("country", cfg.attribute_keys.country);
            cfg.attribute_keys.id = k.value("id", cfg.attribute_keys.id);
        }
    }

    if (doc.contains("topology")) {
        const json& j = doc.at("topology");
        pipedetail::check_keys(j, {"snap_tol_km", "include_planned", "default_voltage_kv", "params"},
                               "topology");
        cfg.snap.snap_tol_km = j.value("snap_tol_km", 2.0);
        cfg.snap.include_planned = j.value("include_planned", false);
        cfg.snap.default_voltage_kv = j.value("default_voltage_kv", 110.0);
        if (j.contains("params")) {
            cfg.line_params.clear();
            for (const auto& [kv, entry] : j.at("params").items()) {
                LineParams lp;
                lp.r_ohm_per_km = entry.at("r_ohm_per_km").get<double>();
                lp.x_ohm_per_km = entry.at("x_ohm_per_km").get<double>();
                lp.s_nom_mva_per_circuit = entry.at("s_nom_mva_per_circuit").get<double>();
                cfg.line_params[parse_double(kv).value()] = lp;
            }
        }
    }

    if (doc.contains("regions")) {
        const json& j = doc.at("regions");
        pipedetail::check_keys(j, {"k", "seed"}, "regions");
        cfg.clusters_k = j.value("k", 0);
        cfg.seed = j.value("seed", 42ULL);
    }

    if (doc.contains("plants")) {
        const json& j = doc.at("plants");
        pipedetail::check_keys(j, {"name_threshold", "dist_km", "priority"}, "plants");
        cfg.match.name_threshold = j.value("name_threshold", 0.85);
        cfg.match.dist_km = j.value("dist_km", 10.0);
        cfg.match.prefer_b = j.value("priority", "a") == "b";
    }

    if (doc.contains("profiles")) {
        const json& j = doc.at("profiles");
        pipedetail::check_keys(j,
                               {"annual_twh", "shape", "start_weekday", "hub_height_m", "turbine",
                                "solar_temp_coeff", "hydro_availability"},
                               "profiles");
        if (j.contains("annual_twh"))
            for (const auto& [cc, twh] : j.at("annual_twh").items())
                cfg.annual_twh[cc] = twh.get<double>();
        if (j.contains("shape")) {
            const json& s = j.at("shape");
            pipedetail::check_keys(
                s, {"weekday_factor", "weekend_factor", "seasonal_amplitude", "peak_day"},
                "profiles.shape");
            if (s.contains("weekday_factor"))
                for (std::size_t h = 0; h < 24; ++h)
                    cfg.demand_shape.weekday_factor[h] = s.at("weekday_factor").at(h).get<double>();
            if (s.contains("weekend_factor"))
                for (std::size_t h = 0; h < 24; ++h)
                    cfg.demand_shape.weekend_factor[h] = s.at("weekend_factor").at(h).get<double>();
            cfg.demand_shape.seasonal_amplitude = s.value("seasonal_amplitude", 0.0);
            cfg.demand_shape.peak_day = s.value("peak_day", 0);
        }
        cfg.start_weekday = j.value("start_weekday", 0);
        cfg.hub_height_m = j.value("hub_height_m", 100.0);
        if (j.contains("turbine")) {
            const json& t = j.at("turbine");
            pipedetail::check_keys(t, {"cut_in_ms", "rated_ms", "cut_out_ms"}, "profiles.turbine");
            cfg.turbine.cut_in_ms = t.value("cut_in_ms", 3.0);
            cfg.turbine.rated_ms = t.value("rated_ms", 12.0);
            cfg.turbine.cut_out_ms = t.value("cut_out_ms", 25.0);
        }
        cfg.solar_temp_coeff = j.value("solar_temp_coeff", -0.004);
        cfg.hydro_availability = j.value("hydro_availability", 0.45);
    }

    if (doc.contains("eligibility")) {
        const json& j = doc.at("eligibility");
        pipedetail::check_keys(j,
                               {"wind", "solar", "wind_density_mw_km2", "solar_density_mw_km2",
                                "battery_potential_mw", "battery_every_nth"},
                               "eligibility");
        if (j.contains("wind")) cfg.wind_rules = pipedetail::parse_rules(j.at("wind"), "eligibility.wind");
        if (j.contains("solar"))
            cfg.solar_rules = pipedetail::parse_rules(j.at("solar"), "eligibility.solar");
        cfg.wind_density_mw_km2 = j.value("wind_density_mw_km2", 3.0);
        cfg.solar_density_mw_km2 = j.value("solar_density_mw_km2", 1.7);
        cfg.battery_potential_mw = j.value("battery_potential_mw", 0.0);
        cfg.battery_every_nth = j.value("battery_every_nth", 1);
        if (cfg.battery_every_nth < 1) throw ConfigError("config: battery_every_nth must be >= 1");
    }

    if (doc.contains("expansion")) {
        const json& j = doc.at("expansion");
        pipedetail::check_keys(
            j, {"co2_cap_t", "snapshots", "slack_penalty", "base_mva", "costs"}, "expansion");
        if (j.contains("co2_cap_t") && !j.at("co2_cap_t").is_null())
            cfg.co2_cap_t = j.at("co2_cap_t").get<double>();
        if (j.contains("snapshots")) {
            const json& s = j.at("snapshots");
            pipedetail::check_keys(s, {"count", "stride", "start"}, "expansion.snapshots");
            cfg.snapshots.count = s.value("count", 168ULL);
            cfg.snapshots.stride = s.value("stride", 1ULL);
            cfg.snapshots.start = s.value("start", 0ULL);
        }
        cfg.expansion.slack_penalty = j.value("slack_penalty", 10000.0);
        cfg.expansion.base_mva = j.value("base_mva", 100.0);
        if (j.contains("costs")) {
            for (const auto& [tech, entry] : j.at("costs").items()) {
                TechCost& tc = cfg.costs[tech];
                pipedetail::check_keys(entry,
                                       {"capex_per_mw", "fixed_om_per_mw_yr", "marginal_per_mwh",
                                        "emission_t_per_mwh", "lifetime_years", "discount_rate",
                                        "expandable", "energy_capex_per_mwh", "eta_charge",
                                        "eta_discharge"},
                                       "expansion.costs." + tech);
                tc.capex_per_mw = entry.value("capex_per_mw", tc.capex_per_mw);
                tc.fixed_om_per_mw_yr = entry.value("fixed_om_per_mw_yr", tc.fixed_om_per_mw_yr);
                tc.marginal_per_mwh = entry.value("marginal_per_mwh", tc.marginal_per_mwh);
                tc.emission_t_per_mwh = entry.value("emission_t_per_mwh", tc.emission_t_per_mwh);
                tc.lifetime_years = entry.value("lifetime_years", tc.lifetime_years);
                tc.discount_rate = entry.value("discount_rate", tc.discount_rate);
                tc.expandable = entry.value("expandable", tc.expandable);
                tc.energy_capex_per_mwh = entry.value("energy_capex_per_mwh", tc.energy_capex_per_mwh);
                tc.eta_charge = entry.value("eta_charge", tc.eta_charge);
                tc.eta_discharge = entry.value("eta_discharge", tc.eta_discharge);
            }
        }
    }

    cfg.raw_json = nlohmann::json(doc).dump();
    return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
    return parse_config(read_text_file(path),
                        std::filesystem::path(path).parent_path().string());
}

/// Load a raster CSV; a `<path>.meta.json` sidecar with `spacing_deg`
/// overrides the configured default spacing.
inline RasterLayer load_raster(const std::string& path, double default_spacing_deg,
                               RasterKind kind) {
    double spacing = default_spacing_deg;
    const std::string sidecar = path + ".meta.json";
    if (std::filesystem::exists(sidecar)) {
        const auto meta = nlohmann::json::parse(read_text_file(sidecar), nullptr, false);
        if (meta.is_discarded())
            throw ParseError("raster sidecar is not valid JSON: " + sidecar);
        spacing = meta.value("spacing_deg", spacing);
    }
    return parse_raster_csv(read_text_file(path), spacing, kind);
}

// -- country shapes ------------------------------------------------------------

struct CountryShape {
    std::string country;
    LonLatRing ring;
};

inline std::vector<CountryShape> parse_country_shapes(const std::string& geojson_text) {
    const nlohmann::json doc = detail::parse_geojson(geojson_text);
    const nlohmann::json& features = detail::feature_collection(doc);
    std::vector<CountryShape> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
        const auto& f = features[i];
        const auto geom = f.find("geometry");
        if (geom == f.end() || geom->value("type", "") != "Polygon") continue;
        CountryShape shape;
        const nlohmann::json props = f.value("properties", nlohmann::json::object());
        shape.country = detail::property_string(props, "country");
        if (shape.country.empty()) shape.country = detail::property_string(props, "ISO_A2");
        const auto& rings = geom->at("coordinates");
        if (rings.empty()) continue;
        for (const auto& c : rings[0]) shape.ring.push_back(detail::coord_pair(c, i));
        if (shape.ring.size() >= 2 && shape.ring.front() == shape.ring.back()) shape.ring.pop_back();
        if (shape.ring.size() >= 3) out.push_back(std::move(shape));
    }
    if (out.empty()) throw ParseError("country shapes: no polygon features");
    return out;
}

// -- manifest -------------------------------------------------------------------

struct ManifestEntry {
    std::string stage;
    std::map<std::string, std::string> input_hashes;
    std::string config_hash;
    std::string timestamp;
};

class Manifest {
public:
    explicit Manifest(const std::string& path) : path_(path) { load(); }

    const ManifestEntry* find(const std::string& stage) const {
        for (const auto& e : entries_)
            if (e.stage == stage) return &e;
        return nullptr;
    }

    void record(ManifestEntry entry) {
        for (auto& e : entries_)
            if (e.stage == entry.stage) {
                e = std::move(entry);
                save();
                return;
            }
        entries_.push_back(std::move(entry));
        save();
    }

private:
    void load() {
        if (!std::filesystem::exists(path_)) return;
        const std::string text = read_text_file(path_);
        for (const auto& line : split(text, '\n')) {
            if (trim(line).empty()) continue;
            const auto doc = nlohmann::json::parse(line, nullptr, false);
            if (doc.is_discarded()) continue;
            ManifestEntry e;
            e.stage = doc.value("stage", "");
            e.config_hash = doc.value("config_hash", "");
            e.timestamp = doc.value("timestamp", "");
            if (doc.contains("inputs"))
                for (const auto& [k, v] : doc.at("inputs").items())
                    e.input_hashes[k] = v.get<std::string>();
            entries_.push_back(std::move(e));
        }
    }

    void save() const {
        std::string out;
        for (const auto& e : entries_) {
            nlohmann::ordered_json doc;
            doc["stage"] = e.stage;
            doc["inputs"] = e.input_hashes;
            doc["config_hash"] = e.config_hash;
            doc["timestamp"] = e.timestamp;
            out += doc.dump() + "\n";
        }
        write_text_file(path_, out);
    }

    std::string path_;
    std::vector<ManifestEntry> entries_;
};

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// -- stage runner ------------------------------------------------------------------

struct StageResult {
    bool skipped = false;  // up to date, nothing written
    std::vector<std::string> outputs;
};

class Pipeline {
public:
    Pipeline(PipelineConfig config, std::ostream& log = std::cerr)
        : cfg_(std::move(config)), log_(log) {}

    StageResult run(Stage stage, bool force = false, const std::string& export_mps_path = "") {
        namespace fs = std::filesystem;
        fs::create_directories(cfg_.output_dir);
        Manifest manifest(out("manifest.jsonl"));

        check_prerequisites(stage);

        ManifestEntry entry;
        entry.stage = to_string(stage);
        entry.config_hash = hash_string(cfg_.raw_json);
        for (const std::string& in : stage_inputs(stage))
            entry.input_hashes[in] = hash_file(in);

        const ManifestEntry* previous = manifest.find(entry.stage);
        if (!force && previous && previous->config_hash == entry.config_hash &&
            previous->input_hashes == entry.input_hashes && outputs_exist(stage)) {
            log_ << "[" << entry.stage << "] up to date\n";
            StageResult r;
            r.skipped = true;
            return r;
        }

        StageResult result;
        switch (stage) {
            case Stage::ingest: result = run_ingest(); break;
            case Stage::build: result = run_build(); break;
            case Stage::cluster: result = run_cluster(); break;
            case Stage::profiles: result = run_profiles(); break;
            case Stage::eligibility: result = run_eligibility(); break;
            case Stage::optimize: result = run_optimize(export_mps_path); break;
            case Stage::report: result = run_report(); break;
        }
        entry.timestamp = utc_timestamp();
        manifest.record(std::move(entry));
        return result;
    }

    const PipelineConfig& config() const { return cfg_; }

    std::string out(const std::string& rel) const {
        return (std::filesystem::path(cfg_.output_dir) / rel).string();
    }

private:
    // ---- plumbing -----------------------------------------------------------

    static void ensure_dir(const std::string& path) {
        std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    }

    void write(const std::string& rel, std::string_view content, StageResult& result) {
        const std::string path = out(rel);
        ensure_dir(path);
        write_text_file(path, content);
        result.outputs.push_back(path);
    }

    std::vector<std::string> stage_inputs(Stage stage) const {
        std::vector<std::string> in;
        auto add = [&](const std::string& p) {
            if (!p.empty()) in.push_back(p);
        };
        switch (stage) {
            case Stage::ingest:
                add(cfg_.substations_path);
                add(cfg_.lines_path);
                for (const auto& p : cfg_.plants_paths) add(p);
                break;
            case Stage::build:
                add(out("ingest/substations.geojson"));
                add(out("ingest/lines.geojson"));
                break;
            case Stage::cluster:
                add(out("build/buses.csv"));
                add(out("build/branches.csv"));
                add(out("ingest/plants.csv"));
                add(cfg_.country_shapes_path);
                if (auto it = cfg_.raster_paths.find(RasterKind::population_density);
                    it != cfg_.raster_paths.end())
                    add(it->second);
                break;
            case Stage::profiles:
                add(out("cluster/cells.geojson"));
                add(out("cluster/weights.csv"));
                add(out("cluster/capacity.csv"));
                add(cfg_.weather_path);
                break;
            case Stage::eligibility:
                add(out("cluster/cells.geojson"));
                for (const auto& [kind, path] : cfg_.raster_paths) add(path);
                break;
            case Stage::optimize:
                add(out("cluster/buses.csv"));
                add(out("cluster/branches.csv"));
                add(out("cluster/capacity.csv"));
                add(out("profiles/demand.csv"));
                add(out("profiles/cf_wind.csv"));
                add(out("profiles/cf_solar.csv"));
                add(out("profiles/inflow.csv"));
                add(out("eligibility/potentials.csv"));
                break;
            case Stage::report:
                add(out("cluster/buses.csv"));
                add(out("cluster/branches.csv"));
                add(out("cluster/cells.geojson"));
                add(out("optimize/capacities.csv"));
                break;
        }
        return in;
    }

    std::vector<std::string> stage_outputs(Stage stage) const {
        switch (stage) {
            case Stage::ingest:
                return {out("ingest/substations.geojson"), out("ingest/lines.geojson"),
                        out("ingest/plants.csv")};
            case Stage::build:
                return {out("build/buses.csv"), out("build/branches.csv")};
            case Stage::cluster:
                return {out("cluster/buses.csv"), out("cluster/branches.csv"),
                        out("cluster/cells.geojson"), out("cluster/capacity.csv"),
                        out("cluster/weights.csv")};
            case Stage::profiles:
                return {out("profiles/demand.csv"), out("profiles/cf_wind.csv"),
                        out("profiles/cf_solar.csv"), out("profiles/inflow.csv")};
            case Stage::eligibility:
                return {out("eligibility/potentials.csv")};
            case Stage::optimize:
                return {out("optimize/capacities.csv"), out("optimize/summary.csv")};
            case Stage::report:
                return {out("report/map.svg")};
        }
        return {};
    }

    bool outputs_exist(Stage stage) const {
        for (const auto& p : stage_outputs(stage))
            if (!std::filesystem::exists(p)) return false;
        return true;
    }

    void check_prerequisites(Stage stage) const {
        for (Stage prev : stage_order()) {
            if (prev == stage) return;
            if (!outputs_exist(prev))
                throw ConfigError("missing artifacts of stage '" + to_string(prev) +
                                  "': run stage '" + to_string(prev) + "' first");
        }
    }

    void require_path(const std::string& path, const std::string& what) const {
        if (path.empty()) throw ConfigError("config: missing path for " + what);
        if (!std::filesystem::exists(path))
            throw ConfigError("config: " + what + " path does not exist: " + path);
    }

    // ---- stages --------------------------------------------------------------

    StageResult run_ingest() {
        StageResult result;
        require_path(cfg_.substations_path, "substations");
        require_path(cfg_.lines_path, "lines");

        IngestReport sub_report, line_report;
        auto subs = parse_substations(read_text_file(cfg_.substations_path), cfg_.dialect,
                                      &sub_report, cfg_.attribute_keys);
        auto lines = parse_lines(read_text_file(cfg_.lines_path), cfg_.dialect, &line_report,
                                 cfg_.attribute_keys);
        log_ << "[ingest] parsed " << subs.size() << " substations, " << lines.size()
             << " lines (skipped " << sub_report.skipped.size() << "/"
             << line_report.skipped.size() << " features)\n";

        double total_length = 0;
        for (const auto& l : lines) total_length += polyline_length_km(l.path);
        log_ << "[ingest] total line length " << fmt_double(total_length) << " km\n";

        FilterReport sub_filter, line_filter;
        subs = filter_transmission(subs, cfg_.voltage_threshold_kv, &sub_filter,
                                   cfg_.keep_missing_voltage);
        lines = filter_transmission(lines, cfg_.voltage_threshold_kv, &line_filter,
                                    cfg_.keep_missing_voltage);
        log_ << "[ingest] transmission filter >= " << fmt_double(cfg_.voltage_threshold_kv)
             << " kV kept " << subs.size() << " substations, " << lines.size() << " lines\n";

        // re-serialize the filtered records as GeoJSON for the next stage
        nlohmann::ordered_json sub_features = nlohmann::ordered_json::array();
        for (const auto& s : subs) {
            nlohmann::ordered_json f;
            f["type"] = "Feature";
            f["geometry"] = {{"type", "Point"}, {"coordinates", {s.location.lon, s.location.lat}}};
            f["properties"] = {{"id", s.id}, {"country", s.country}};
            if (s.voltage_kv) f["properties"]["voltage"] = *s.voltage_kv;
            sub_features.push_back(std::move(f));
        }
        nlohmann::ordered_json line_features = nlohmann::ordered_json::array();
        for (const auto& l : lines) {
            nlohmann::ordered_json coords = nlohmann::ordered_json::array();
            for (const auto& p : l.path) coords.push_back({p.lon, p.lat});
            nlohmann::ordered_json f;
            f["type"] = "Feature";
            f["geometry"] = {{"type", "LineString"}, {"coordinates", std::move(coords)}};
            f["properties"] = {{"id", l.id},
                               {"circuits", l.circuits},
                               {"status", to_string(l.status)}};
            if (l.voltage_kv) f["properties"]["voltage"] = *l.voltage_kv;
            line_features.push_back(std::move(f));
        }
        nlohmann::ordered_json sub_doc{{"type", "FeatureCollection"},
                                       {"features", std::move(sub_features)}};
        nlohmann::ordered_json line_doc{{"type", "FeatureCollection"},
                                        {"features", std::move(line_features)}};
        write("ingest/substations.geojson", sub_doc.dump(), result);
        write("ingest/lines.geojson", line_doc.dump(), result);
        write("ingest/substation_rejects.csv", sub_report.to_csv(), result);
        write("ingest/line_rejects.csv", line_report.to_csv(), result);
        write("ingest/filter_rejects.csv", line_filter.to_csv(), result);

        // plants: parse one or two databases, matching when two
        std::vector<PowerPlant> plants;
        MatchReport match_report;
        if (!cfg_.plants_paths.empty()) {
            PlantParseReport pr;
            plants = parse_plants_csv(read_text_file(cfg_.plants_paths[0]), &pr, "a");
            if (cfg_.plants_paths.size() > 1) {
                PlantParseReport pr2;
                const auto second =
                    parse_plants_csv(read_text_file(cfg_.plants_paths[1]), &pr2, "b");
                plants = match_plants(plants, second, cfg_.match, &match_report);
                log_ << "[ingest] matched " << match_report.matches.size()
                     << " plant records across databases\n";
            }
            log_ << "[ingest] " << plants.size() << " power plants\n";
        }
        CsvWriter pw({"name", "country", "fuel", "capacity_mw", "lat", "lon", "source"});
        for (const auto& p : plants)
            pw.row({p.name, p.country, to_string(p.fuel), fmt_double(p.capacity_mw),
                    fmt_double(p.location.lat), fmt_double(p.location.lon), p.source});
        write("ingest/plants.csv", pw.str(), result);
        write("ingest/match_report.csv", match_report.to_csv(), result);
        return result;
    }

    StageResult run_build() {
        StageResult result;
        IngestReport ignored;
        const auto subs = parse_substations(read_text_file(out("ingest/substations.geojson")),
                                            cfg_.dialect, &ignored);
        const auto lines =
            parse_lines(read_text_file(out("ingest/lines.geojson")), cfg_.dialect, &ignored);

        BuildReport report;
        Network net = snap_and_build(subs, lines, cfg_.snap, &report);
        net = assign_electrical_params(net, cfg_.line_params);
        const auto comps = connected_components(net);
        log_ << "[build] " << net.buses.size() << " buses, " << net.branches.size()
             << " branches, " << comps.size() << " connected component(s); " << report.virtual_buses
             << " virtual buses, " << report.merged_substations << " merged substations\n";

        write("build/buses.csv", buses_to_csv(net), result);
        write("build/branches.csv", branches_to_csv(net), result);
        write("build/network.geojson", network_to_geojson(net), result);
        return result;
    }

    StageResult run_cluster() {
        StageResult result;
        require_path(cfg_.country_shapes_path, "country_shapes");
        const Network net = network_from_csv(read_text_file(out("build/buses.csv")),
                                             read_text_file(out("build/branches.csv")));
        const auto shapes = parse_country_shapes(read_text_file(cfg_.country_shapes_path));

        // Voronoi cells per country, seeded by that country's buses
        std::map<std::string, const CountryShape*> shape_by_country;
        for (const auto& s : shapes) shape_by_country[s.country] = &s;
        std::map<std::string, std::vector<VoronoiSeed>> seeds_by_country;
        for (const Bus& b : net.buses) {
            if (!shape_by_country.count(b.country))
                throw ConfigError("cluster: no country shape for '" + b.country + "' (bus " +
                                  b.id + ")");
            seeds_by_country[b.country].push_back({b.id, b.location});
        }
        std::vector<RegionCell> cells;
        std::size_t dup_warnings = 0;
        for (const auto& [country, seeds] : seeds_by_country) {
            auto country_cells =
                build_voronoi(shape_by_country.at(country)->ring, country, seeds, {}, &dup_warnings);
            for (auto& c : country_cells) cells.push_back(std::move(c));
        }
        if (dup_warnings)
            log_ << "[cluster] perturbed " << dup_warnings << " duplicate seed point(s)\n";

        // population-share weights (demand proxy); unit weights without a raster
        std::map<std::string, double> weights;
        if (auto it = cfg_.raster_paths.find(RasterKind::population_density);
            it != cfg_.raster_paths.end()) {
            const RasterLayer pop =
                load_raster(it->second, cfg_.raster_spacing_deg, RasterKind::population_density);
            for (const auto& cell : cells) weights[cell.bus_id] = population_in_cell(cell, pop);
        } else {
            log_ << "[cluster] no population raster, using unit weights\n";
            for (const auto& cell : cells) weights[cell.bus_id] = 1.0;
        }

        const int k = cfg_.clusters_k > 0 ? cfg_.clusters_k
                                          : static_cast<int>(seeds_by_country.size());
        const ClusterMap cm = kmeans_cluster(net, weights, k, cfg_.seed);
        log_ << "[cluster] k = " << cm.k << ", inertia " << fmt_double(cm.inertia) << "\n";

        // plants onto raw cells, then aggregate everything
        PlantParseReport ignored;
        const auto plants = parse_plants_csv(read_text_file(out("ingest/plants.csv")), &ignored);
        AssignReport assign_report;
        const auto plants_by_bus = assign_to_regions(plants, cells, &assign_report);
        if (assign_report.outside_cells)
            log_ << "[cluster] " << assign_report.outside_cells
                 << " plant(s) outside all cells mapped to nearest\n";

        const AggregateResult agg = aggregate_network(net, cm, cells, plants_by_bus, {}, weights);

        write("cluster/cells_raw.geojson", cells_to_geojson(cells, &cm.assignment), result);
        write("cluster/clustermap.csv", clustermap_to_csv(cm), result);
        write("cluster/buses.csv", buses_to_csv(agg.network), result);
        write("cluster/branches.csv", branches_to_csv(agg.network), result);
        write("cluster/cells.geojson", cells_to_geojson(agg.cells), result);
        CsvWriter cw({"bus", "tech", "capacity_mw"});
        for (const auto& [bus, fuels] : agg.plant_capacity)
            for (const auto& [fuel, mw] : fuels) cw.row({bus, fuel, fmt_double(mw)});
        write("cluster/capacity.csv", cw.str(), result);
        CsvWriter ww({"bus", "weight"});
        for (const auto& [bus, w] : agg.weight) ww.row({bus, fmt_double(w)});
        write("cluster/weights.csv", ww.str(), result);
        return result;
    }

    std::vector<RegionCell> load_cluster_cells() const {
        const nlohmann::json doc =
            detail::parse_geojson(read_text_file(out("cluster/cells.geojson")));
        std::vector<RegionCell> cells;
        for (const auto& f : detail::feature_collection(doc)) {
            RegionCell cell;
            const nlohmann::json props = f.value("properties", nlohmann::json::object());
            cell.bus_id = detail::property_string(props, "bus_id");
            cell.country = detail::property_string(props, "country");
            cell.area_km2 = props.value("area_km2", 0.0);
            const auto& geom = f.at("geometry");
            auto read_ring = [](const nlohmann::json& ring) {
                LonLatRing out;
                for (const auto& c : ring)
                    out.push_back({c[0].get<double>(), c[1].get<double>()});
                if (out.size() >= 2 && out.front() == out.back()) out.pop_back();
                return out;
            };
            if (geom.value("type", "") == "Polygon") {
                cell.polygons.push_back(read_ring(geom.at("coordinates")[0]));
            } else if (geom.value("type", "") == "MultiPolygon") {
                for (const auto& poly : geom.at("coordinates"))
                    cell.polygons.push_back(read_ring(poly[0]));
            }
            cells.push_back(std::move(cell));
        }
        return cells;
    }

    std::map<std::string, std::map<std::string, double>> load_capacity() const {
        const CsvTable t = parse_csv(read_text_file(out("cluster/capacity.csv")));
        const int c_bus = t.require_column("bus"), c_tech = t.require_column("tech"),
                  c_mw = t.require_column("capacity_mw");
        std::map<std::string, std::map<std::string, double>> cap;
        for (const auto& row : t.rows)
            cap[row[static_cast<std::size_t>(c_bus)]][row[static_cast<std::size_t>(c_tech)]] +=
                parse_double(row[static_cast<std::size_t>(c_mw)]).value_or(0);
        return cap;
    }

    StageResult run_profiles() {
        StageResult result;
        require_path(cfg_.weather_path, "weather");
        const auto cells = load_cluster_cells();
        const WeatherGrid weather = parse_weather_csv(read_text_file(cfg_.weather_path));

        // demand weights: cluster population share per country
        const CsvTable wt = parse_csv(read_text_file(out("cluster/weights.csv")));
        const int c_bus = wt.require_column("bus"), c_w = wt.require_column("weight");
        std::map<std::string, double> weight;
        for (const auto& row : wt.rows)
            weight[row[static_cast<std::size_t>(c_bus)]] =
                parse_double(row[static_cast<std::size_t>(c_w)]).value_or(0);

        std::map<std::string, std::string> region_country;
        for (const auto& cell : cells) region_country[cell.bus_id] = cell.country;
        std::map<std::string, double> country_total;
        for (const auto& [bus, w] : weight) country_total[region_country.at(bus)] += w;
        std::map<std::string, double> shares;
        for (const auto& [bus, w] : weight) {
            const double total = country_total.at(region_country.at(bus));
            const auto n = static_cast<double>(
                std::count_if(weight.begin(), weight.end(), [&](const auto& kv) {
                    return region_country.at(kv.first) == region_country.at(bus);
                }));
            shares[bus] = total > 0 ? w / total : 1.0 / n;
        }

        for (const auto& [country, twh] : cfg_.annual_twh)
            if (!country_total.count(country))
                log_ << "[profiles] note: annual_twh for '" << country
                     << "' has no matching region\n";
        for (const auto& [country, total] : country_total)
            if (!cfg_.annual_twh.count(country))
                throw ConfigError("profiles: no annual_twh for country '" + country + "'");

        const SeriesTable demand = synth_demand(cfg_.annual_twh, shares, region_country,
                                                cfg_.demand_shape, weather.hours,
                                                cfg_.start_weekday);

        std::map<std::string, LonLat> cell_locations;
        for (const auto& c : weather.cells) cell_locations[c.id] = c.location;
        RegionalizeReport wind_rep, solar_rep, runoff_rep;
        const SeriesTable wind = regionalize(wind_cf(weather, cfg_.hub_height_m, cfg_.turbine),
                                             cell_locations, cells, &wind_rep);
        const SeriesTable solar = regionalize(solar_cf(weather, cfg_.solar_temp_coeff),
                                              cell_locations, cells, &solar_rep);
        if (!wind_rep.fallback_regions.empty())
            log_ << "[profiles] " << wind_rep.fallback_regions.size()
                 << " region(s) had no weather cell, nearest used\n";

        // hydro inflow: normalized regional runoff scaled to the modelled
        // energy budget of each cluster's hydro fleet
        SeriesTable runoff_cells;
        runoff_cells.kind = SeriesKind::inflow_mw;
        for (std::size_t c = 0; c < weather.cells.size(); ++c) {
            runoff_cells.regions.push_back(weather.cells[c].id);
            runoff_cells.values.push_back(weather.runoff[c]);
        }
        runoff_cells.sort_regions();
        const SeriesTable runoff = regionalize(runoff_cells, cell_locations, cells, &runoff_rep);
        const auto capacity = load_capacity();
        SeriesTable inflow;
        inflow.kind = SeriesKind::inflow_mw;
        for (std::size_t r = 0; r < runoff.regions.size(); ++r) {
            const std::string& bus = runoff.regions[r];
            double hydro_mw = 0;
            if (auto it = capacity.find(bus); it != capacity.end())
                if (auto ith = it->second.find("hydro"); ith != it->second.end())
                    hydro_mw = ith->second;
            std::vector<double> series(weather.hours, 0.0);
            if (hydro_mw > 0) {
                const double energy =
                    hydro_mw * static_cast<double>(weather.hours) * cfg_.hydro_availability;
                bool flat = true;
                for (double v : runoff.values[r])
                    if (v > 0) flat = false;
                series = flat ? std::vector<double>(weather.hours, energy /
                                                                       static_cast<double>(weather.hours))
                              : hydro_inflow(runoff.values[r], energy);
                if (flat) log_ << "[profiles] zero runoff at " << bus << ", flat inflow used\n";
            }
            inflow.regions.push_back(bus);
            inflow.values.push_back(std::move(series));
        }

        write("profiles/demand.csv", demand.to_csv(), result);
        write("profiles/cf_wind.csv", wind.to_csv(), result);
        write("profiles/cf_solar.csv", solar.to_csv(), result);
        write("profiles/inflow.csv", inflow.to_csv(), result);
        return result;
    }

    StageResult run_eligibility() {
        StageResult result;
        const auto cells = load_cluster_cells();
        RasterStack layers;
        for (const auto& [kind, path] : cfg_.raster_paths) {
            require_path(path, to_string(kind) + " raster");
            layers[kind] = parse_raster_csv(read_text_file(path), cfg_.raster_spacing_deg, kind);
        }

        CsvWriter w({"bus_id", "tech", "eligible_fraction", "eligible_area_km2", "potential_mw"});
        std::vector<const RegionCell*> sorted;
        for (const auto& c : cells) sorted.push_back(&c);
        std::sort(sorted.begin(), sorted.end(),
                  [](const RegionCell* a, const RegionCell* b) { return a->bus_id < b->bus_id; });
        int index = 0;
        for (const RegionCell* cell : sorted) {
            const auto wind = eligible_fraction(*cell, layers, cfg_.wind_rules);
            const auto solar = eligible_fraction(*cell, layers, cfg_.solar_rules);
            w.row({cell->bus_id, "wind", fmt_double(wind.fraction),
                   fmt_double(wind.eligible_area_km2),
                   fmt_double(potential_mw(wind.eligible_area_km2, cfg_.wind_density_mw_km2))});
            w.row({cell->bus_id, "solar", fmt_double(solar.fraction),
                   fmt_double(solar.eligible_area_km2),
                   fmt_double(potential_mw(solar.eligible_area_km2, cfg_.solar_density_mw_km2))});
            if (cfg_.battery_potential_mw > 0 && index % cfg_.battery_every_nth == 0)
                w.row({cell->bus_id, "battery", "1", "0", fmt_double(cfg_.battery_potential_mw)});
            ++index;
        }
        write("eligibility/potentials.csv", w.str(), result);
        return result;
    }

    StageResult run_optimize(const std::string& export_mps_path) {
        StageResult result;
        const Network net = network_from_csv(read_text_file(out("cluster/buses.csv")),
                                             read_text_file(out("cluster/branches.csv")));
        const auto capacity = load_capacity();
        const auto demand =
            SeriesTable::from_csv(read_text_file(out("profiles/demand.csv")), SeriesKind::demand_mw);
        const auto cf_wind =
            SeriesTable::from_csv(read_text_file(out("profiles/cf_wind.csv")), SeriesKind::cf_wind);
        const auto cf_solar = SeriesTable::from_csv(read_text_file(out("profiles/cf_solar.csv")),
                                                    SeriesKind::cf_solar);
        const auto inflow =
            SeriesTable::from_csv(read_text_file(out("profiles/inflow.csv")), SeriesKind::inflow_mw);

        std::map<std::string, std::map<std::string, double>> potentials;
        {
            const CsvTable t = parse_csv(read_text_file(out("eligibility/potentials.csv")));
            const int c_bus = t.require_column("bus_id"), c_tech = t.require_column("tech"),
                      c_mw = t.require_column("potential_mw");
            for (const auto& row : t.rows)
                potentials[row[static_cast<std::size_t>(c_bus)]]
                          [row[static_cast<std::size_t>(c_tech)]] =
                              parse_double(row[static_cast<std::size_t>(c_mw)]).value_or(0);
        }

        const ExpansionProblem ep =
            build_problem(net, capacity, demand, cf_wind, cf_solar, inflow, potentials, cfg_.costs,
                          cfg_.co2_cap_t, cfg_.snapshots, cfg_.expansion);
        log_ << "[optimize] LP: " << ep.lp.num_rows() << " rows, " << ep.lp.num_cols()
             << " cols, " << ep.lp.entries.size() << " nonzeros\n";

        if (!export_mps_path.empty()) {
            write_text_file(export_mps_path, write_mps(ep.lp));
            log_ << "[optimize] exported MPS to " << export_mps_path << "\n";
        }

        const ExpansionSolution sol = solve_expansion(ep);
        log_ << "[optimize] status " << to_string(sol.status) << ", objective "
             << fmt_double(sol.objective) << ", " << sol.lp.iterations << " iterations ("
             << sol.pivot_policy << ")\n";
        if (sol.status != LpStatus::optimal)
            throw std::runtime_error("optimize: solver returned " + to_string(sol.status));

        const auto rep = verify_solution(ep, net, sol);
        log_ << "[optimize] verification: primal residual " << fmt_double(rep.lp.max_row_residual)
             << ", duality gap " << fmt_double(rep.lp.duality_gap_rel) << ", energy imbalance "
             << fmt_double(rep.max_energy_balance_residual_mw) << " MW\n";
        if (!rep.ok())
            throw std::runtime_error("optimize: solution failed independent verification");

        write("optimize/capacities.csv", capacities_to_csv(ep, sol), result);
        write("optimize/dispatch.csv", dispatch_to_csv(ep, sol), result);
        write("optimize/flows.csv", flows_to_csv(ep, sol), result);
        write("optimize/prices.csv", prices_to_csv(ep, sol), result);
        write("optimize/summary.csv", summary_to_csv(sol), result);
        return result;
    }

    StageResult run_report() {
        StageResult result;
        const Network net = network_from_csv(read_text_file(out("cluster/buses.csv")),
                                             read_text_file(out("cluster/branches.csv")));
        const auto cells = load_cluster_cells();

        // rebuild capacity view from the optimize outputs
        ExpansionProblem ep;
        ExpansionSolution sol;
        const CsvTable t = parse_csv(read_text_file(out("optimize/capacities.csv")));
        const int c_bus = t.require_column("bus"), c_tech = t.require_column("tech"),
                  c_ex = t.require_column("existing_mw"), c_built = t.require_column("built_mw");
        for (const auto& row : t.rows) {
            const std::string& bus = row[static_cast<std::size_t>(c_bus)];
            const std::string& tech = row[static_cast<std::size_t>(c_tech)];
            ep.existing[bus][tech] += parse_double(row[static_cast<std::size_t>(c_ex)]).value_or(0);
            const double built = parse_double(row[static_cast<std::size_t>(c_built)]).value_or(0);
            if (built > 0) sol.built_mw[bus][tech] += built;
        }
        write("report/map.svg", render_map(net, cells, &ep, &sol), result);
        return result;
    }

    PipelineConfig cfg_;
    std::ostream& log_;
};

}  // namespace gridweaver

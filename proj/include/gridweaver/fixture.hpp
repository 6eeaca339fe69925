#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridweaver/common.hpp"
#include "gridweaver/csv.hpp"
#include "gridweaver/geo.hpp"

namespace gridweaver {

/// Deterministic two-country synthetic dataset for demos, smoke runs
/// and the end-to-end suite: substations and lines on jittered grids,
/// a plant register (two databases with overlapping records), hourly
/// weather, exclusion rasters, country shapes, and a ready-to-run
/// pipeline configuration.
struct FixtureOptions {
    std::size_t buses_aa = 60;
    std::size_t buses_bb = 40;
    std::size_t hours = 168;
    int k = 10;
    std::uint64_t seed = 42;
    int battery_every_nth = 3;
    std::optional<double> co2_cap_t = 300000.0;
    std::string output_subdir = "out";
};

namespace fixturedetail {

struct Station {
    std::string id;
    LonLat loc;
    double kv;
    std::string country;
};

inline void append_grid(std::vector<Station>& stations, Rng& rng, const std::string& country,
                        double lon0, double lon1, double lat0, double lat1, std::size_t nx,
                        std::size_t ny, std::size_t count) {
    const double kv_cycle[] = {220, 110, 330, 220, 110};
    std::size_t made = 0;
    for (std::size_t j = 0; j < ny && made < count; ++j) {
        for (std::size_t i = 0; i < nx && made < count; ++i) {
            Station s;
            s.id = country + "_s" + std::to_string(made);
            s.loc.lon = lon0 + (lon1 - lon0) * static_cast<double>(i) / static_cast<double>(nx - 1) +
                        0.04 * (rng.next_double() - 0.5);
            s.loc.lat = lat0 + (lat1 - lat0) * static_cast<double>(j) / static_cast<double>(ny - 1) +
                        0.04 * (rng.next_double() - 0.5);
            s.kv = kv_cycle[made % 5];
            if (made % 17 == 11) s.kv = 66;  // sub-transmission, filtered out at ingest
            s.country = country;
            stations.push_back(s);
            ++made;
        }
    }
}

}  // namespace fixturedetail

/// Write the synthetic dataset into dir and return the path of the
/// generated pipeline configuration.
inline std::string write_fixture(const std::string& dir, const FixtureOptions& opt = {}) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Rng rng(opt.seed);

    // -- substations ------------------------------------------------------
    std::vector<fixturedetail::Station> stations;
    fixturedetail::append_grid(stations, rng, "AA", 0.3, 3.7, 0.3, 3.7, 10, 6, opt.buses_aa);
    const std::size_t aa_count = stations.size();
    fixturedetail::append_grid(stations, rng, "BB", 4.5, 7.7, 0.3, 3.7, 8, 5, opt.buses_bb);

    nlohmann::ordered_json sub_features = nlohmann::ordered_json::array();
    for (const auto& s : stations) {
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {s.loc.lon, s.loc.lat}}};
        // voltages tagged in volts, as open data usually does
        f["properties"] = {{"id", s.id},
                           {"voltage", fmt_double(s.kv * 1000)},
                           {"country", s.country}};
        sub_features.push_back(std::move(f));
    }
    write_text_file((fs::path(dir) / "substations.geojson").string(),
                    nlohmann::ordered_json{{"type", "FeatureCollection"},
                                           {"features", std::move(sub_features)}}
                        .dump());

    // -- lines: connected grid per country plus cross-border ties ----------
    nlohmann::ordered_json line_features = nlohmann::ordered_json::array();
    std::size_t line_no = 0;
    auto add_line = [&](const fixturedetail::Station& a, const fixturedetail::Station& b,
                        bool planned = false) {
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        // one mid-path vertex so paths are polylines, not plain segments
        const double mid_lon = (a.loc.lon + b.loc.lon) / 2 + 0.01 * (rng.next_double() - 0.5);
        const double mid_lat = (a.loc.lat + b.loc.lat) / 2 + 0.01 * (rng.next_double() - 0.5);
        f["geometry"] = {{"type", "LineString"},
                         {"coordinates",
                          {{a.loc.lon, a.loc.lat}, {mid_lon, mid_lat}, {b.loc.lon, b.loc.lat}}}};
        f["properties"] = {{"id", "l" + std::to_string(line_no)},
                           {"voltage", fmt_double(std::max(a.kv, b.kv) * 1000)},
                           {"circuits", line_no % 5 == 0 ? 2 : 1},
                           {"status", planned ? "planned" : "existing"}};
        line_features.push_back(std::move(f));
        ++line_no;
    };
    auto connect_country = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i + 1 < end; ++i) {
            add_line(stations[i], stations[i + 1], line_no % 23 == 21);
            if (i + 7 < end && i % 2 == 0) add_line(stations[i], stations[i + 7]);
        }
    };
    connect_country(0, aa_count);
    connect_country(aa_count, stations.size());
    // two ties between the countries
    add_line(stations[aa_count - 1], stations[aa_count]);
    add_line(stations[aa_count / 2], stations[aa_count + opt.buses_bb / 2]);
    write_text_file((fs::path(dir) / "lines.geojson").string(),
                    nlohmann::ordered_json{{"type", "FeatureCollection"},
                                           {"features", std::move(line_features)}}
                        .dump());

    // -- plants: two overlapping registers ----------------------------------
    const char* fuels[] = {"Coal", "Natural Gas", "Hydro", "Oil", "Wind", "Solar PV"};
    CsvWriter plants_a({"name", "country", "fuel", "capacity_mw", "lat", "lon"});
    CsvWriter plants_b({"name", "country", "fuel", "capacity_mw", "lat", "lon"});
    std::size_t plant_no = 0;
    for (std::size_t i = 0; i < stations.size(); i += 4) {
        const auto& s = stations[i];
        const std::string fuel = fuels[plant_no % 6];
        const double mw = 80 + 320 * rng.next_double();
        const std::string name = s.country + " Plant " + std::to_string(plant_no);
        plants_a.row({name, s.country, fuel, fmt_double(mw), fmt_double(s.loc.lat + 0.01),
                      fmt_double(s.loc.lon + 0.01)});
        if (plant_no % 3 == 0) {
            // the same asset under a slightly different record
            plants_b.row({name + " GS", s.country, fuel, fmt_double(mw * 1.02),
                          fmt_double(s.loc.lat + 0.012), fmt_double(s.loc.lon + 0.008)});
        }
        ++plant_no;
    }
    write_text_file((fs::path(dir) / "plants_a.csv").string(), plants_a.str());
    write_text_file((fs::path(dir) / "plants_b.csv").string(), plants_b.str());

    // -- weather ---------------------------------------------------------------
    CsvWriter weather({"cell_id", "lon", "lat", "hour", "wind_ms", "ghi_wm2", "temp_c", "runoff"});
    std::size_t cell_no = 0;
    for (double lat = 0.5; lat < 4.0; lat += 1.0) {
        for (double lon = 0.5; lon < 8.0; lon += 1.0) {
            const std::string id = "w" + std::to_string(cell_no);
            const double phase = 0.7 * static_cast<double>(cell_no);
            for (std::size_t t = 0; t < opt.hours; ++t) {
                const double hr = static_cast<double>(t % 24);
                const double wind =
                    std::max(0.0, 8.0 + 4.0 * std::sin(2 * kPi * static_cast<double>(t) / 31.0 + phase) +
                                      3.0 * std::sin(2 * kPi * static_cast<double>(t) / 9.0) +
                                      2.0 * (rng.next_double() - 0.5));
                const double ghi = (hr >= 6 && hr <= 18)
                                       ? 950.0 * std::sin(kPi * (hr - 6) / 12.0) *
                                             (0.75 + 0.25 * rng.next_double())
                                       : 0.0;
                const double temp = 18.0 + 8.0 * std::sin(2 * kPi * (hr - 9) / 24.0) +
                                    2.0 * (rng.next_double() - 0.5);
                const double runoff =
                    0.6 + 0.4 * std::sin(2 * kPi * static_cast<double>(t) / 168.0 + phase) +
                    0.2 * rng.next_double();
                weather.row({id, fmt_double(lon), fmt_double(lat), std::to_string(t),
                             fmt_double(wind), fmt_double(ghi), fmt_double(temp),
                             fmt_double(std::max(0.05, runoff))});
            }
            ++cell_no;
        }
    }
    write_text_file((fs::path(dir) / "weather.csv").string(), weather.str());

    // -- rasters ------------------------------------------------------------------
    const double spacing = 0.2;
    CsvWriter landcover({"lon", "lat", "value"});
    CsvWriter protected_areas({"lon", "lat", "value"});
    CsvWriter population({"lon", "lat", "value"});
    CsvWriter elevation({"lon", "lat", "value"});
    std::size_t gi = 0, gj = 0;
    for (double lat = 0.1; lat < 4.0; lat += spacing, ++gj) {
        gi = 0;
        for (double lon = 0.1; lon < 8.0; lon += spacing, ++gi) {
            const int lc = 1 + static_cast<int>((gi + gj) % 5);
            const bool prot = (lon > 2.0 && lon < 2.8 && lat > 2.0 && lat < 2.8) ||
                              (lon > 6.0 && lon < 6.6 && lat > 1.0 && lat < 1.8);
            const double pop =
                60.0 + 500.0 * std::abs(std::sin(0.9 * lon) * std::cos(1.3 * lat));
            const double elev = 120.0 + 80.0 * std::sin(lon / 2.5) * std::cos(lat / 1.5);
            landcover.row({fmt_double(lon), fmt_double(lat), std::to_string(lc)});
            protected_areas.row({fmt_double(lon), fmt_double(lat), prot ? "1" : "0"});
            population.row({fmt_double(lon), fmt_double(lat), fmt_double(pop)});
            elevation.row({fmt_double(lon), fmt_double(lat), fmt_double(elev)});
        }
    }
    write_text_file((fs::path(dir) / "landcover.csv").string(), landcover.str());
    write_text_file((fs::path(dir) / "protected.csv").string(), protected_areas.str());
    write_text_file((fs::path(dir) / "population.csv").string(), population.str());
    write_text_file((fs::path(dir) / "elevation.csv").string(), elevation.str());

    // -- country shapes --------------------------------------------------------
    nlohmann::ordered_json shapes = nlohmann::ordered_json::array();
    auto shape = [&](const std::string& cc, double lon0, double lon1, double lat0, double lat1) {
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {
            {"type", "Polygon"},
            {"coordinates",
             {{{lon0, lat0}, {lon1, lat0}, {lon1, lat1}, {lon0, lat1}, {lon0, lat0}}}}};
        f["properties"] = {{"country", cc}};
        shapes.push_back(std::move(f));
    };
    shape("AA", 0.0, 4.0, 0.0, 4.0);
    shape("BB", 4.1, 8.0, 0.0, 4.0);
    write_text_file((fs::path(dir) / "countries.geojson").string(),
                    nlohmann::ordered_json{{"type", "FeatureCollection"}, {"features", shapes}}
                        .dump());

    // -- pipeline configuration ---------------------------------------------------
    nlohmann::ordered_json config;
    config["paths"] = {{"substations", "substations.geojson"},
                       {"lines", "lines.geojson"},
                       {"plants", {"plants_a.csv", "plants_b.csv"}},
                       {"weather", "weather.csv"},
                       {"rasters",
                        {{"landcover", "landcover.csv"},
                         {"protected", "protected.csv"},
                         {"population", "population.csv"},
                         {"elevation", "elevation.csv"}}},
                       {"raster_spacing_deg", spacing},
                       {"country_shapes", "countries.geojson"},
                       {"output_dir", opt.output_subdir}};
    config["ingest"] = {{"dialect", "worldbank"}, {"voltage_threshold_kv", 110.0}};
    config["topology"] = {{"snap_tol_km", 2.0}};
    config["regions"] = {{"k", opt.k}, {"seed", opt.seed}};
    config["plants"] = {{"name_threshold", 0.85}, {"dist_km", 10.0}};
    // energy budgets for the modelled window (the demand synthesizer
    // spreads the whole budget over the series it generates)
    config["profiles"] = {{"annual_twh", {{"AA", 0.20}, {"BB", 0.12}}},
                          {"shape",
                           {{"seasonal_amplitude", 0.15},
                            {"peak_day", 15}}},
                          {"hydro_availability", 0.45}};
    config["eligibility"] = {{"wind",
                              {{"excluded_landcover_codes", {5}},
                               {"protected_excluded", true},
                               {"max_population_density", 400.0},
                               {"max_water_depth_m", 50.0}}},
                             {"solar",
                              {{"excluded_landcover_codes", {4, 5}},
                               {"protected_excluded", true},
                               {"max_population_density", 800.0}}},
                             {"wind_density_mw_km2", 3.0},
                             {"solar_density_mw_km2", 1.7},
                             {"battery_potential_mw", 150.0},
                             {"battery_every_nth", opt.battery_every_nth}};
    config["expansion"] = {{"snapshots", {{"count", opt.hours}, {"stride", 1}, {"start", 0}}}};
    if (opt.co2_cap_t) config["expansion"]["co2_cap_t"] = *opt.co2_cap_t;

    const std::string config_path = (fs::path(dir) / "config.json").string();
    write_text_file(config_path, config.dump(2) + "\n");
    return config_path;
}

}  // namespace gridweaver

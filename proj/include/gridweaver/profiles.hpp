#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "gridweaver/csv.hpp"
#include "gridweaver/geo.hpp"
#include "gridweaver/regions.hpp"

namespace gridweaver {

enum class SeriesKind { demand_mw, cf_wind, cf_solar, inflow_mw };

inline std::string to_string(SeriesKind k) {
    switch (k) {
        case SeriesKind::demand_mw: return "demand_mw";
        case SeriesKind::cf_wind: return "cf_wind";
        case SeriesKind::cf_solar: return "cf_solar";
        case SeriesKind::inflow_mw: return "inflow_mw";
    }
    return "unknown";
}

/// Hourly values per region, regions kept sorted by id.
struct SeriesTable {
    SeriesKind kind = SeriesKind::demand_mw;
    std::vector<std::string> regions;
    std::vector<std::vector<double>> values;  // [region][hour]

    std::size_t hours() const { return values.empty() ? 0 : values[0].size(); }

    int region_index(std::string_view id) const {
        for (std::size_t i = 0; i < regions.size(); ++i)
            if (regions[i] == id) return static_cast<int>(i);
        return -1;
    }

    const std::vector<double>& series(std::string_view id) const {
        const int i = region_index(id);
        if (i < 0) throw ContractError("series table has no region " + std::string(id));
        return values[static_cast<std::size_t>(i)];
    }

    void sort_regions() {
        std::vector<std::size_t> order(regions.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return regions[a] < regions[b]; });
        std::vector<std::string> r;
        std::vector<std::vector<double>> v;
        for (std::size_t i : order) {
            r.push_back(std::move(regions[i]));
            v.push_back(std::move(values[i]));
        }
        regions = std::move(r);
        values = std::move(v);
    }

    /// CSV matrix: first column hour, one column per region.
    std::string to_csv() const {
        std::vector<std::string> header{"hour"};
        for (const auto& r : regions) header.push_back(r);
        CsvWriter w(header);
        for (std::size_t t = 0; t < hours(); ++t) {
            std::vector<std::string> row{std::to_string(t)};
            for (const auto& v : values) row.push_back(fmt_double(v[t]));
            w.row(row);
        }
        return w.str();
    }

    static SeriesTable from_csv(const std::string& text, SeriesKind kind) {
        const CsvTable t = parse_csv(text);
        if (t.header.empty() || t.header[0] != "hour")
            throw ParseError("series CSV must start with an 'hour' column");
        SeriesTable out;
        out.kind = kind;
        out.regions.assign(t.header.begin() + 1, t.header.end());
        out.values.assign(out.regions.size(), {});
        for (const auto& row : t.rows)
            for (std::size_t c = 1; c < row.size() && c <= out.regions.size(); ++c)
                out.values[c - 1].push_back(parse_double(row[c]).value_or(0));
        return out;
    }
};

// -- weather input -------------------------------------------------------

struct WeatherCell {
    std::string id;
    LonLat location;
};

struct WeatherGrid {
    std::vector<WeatherCell> cells;
    std::size_t hours = 0;
    std::vector<std::vector<double>> wind_ms;   // [cell][hour]
    std::vector<std::vector<double>> ghi_wm2;   // [cell][hour]
    std::vector<std::vector<double>> temp_c;    // [cell][hour]
    std::vector<std::vector<double>> runoff;    // [cell][hour], unitless

    void validate() const {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (wind_ms[c].size() != hours || ghi_wm2[c].size() != hours ||
                temp_c[c].size() != hours || runoff[c].size() != hours)
                throw ParseError("weather cell " + cells[c].id + ": incomplete hourly series");
            for (std::size_t t = 0; t < hours; ++t)
                if (wind_ms[c][t] < 0 || ghi_wm2[c][t] < 0 || runoff[c][t] < 0)
                    throw ParseError("weather cell " + cells[c].id + ": negative value at hour " +
                                     std::to_string(t));
        }
    }
};

/// Long-format weather CSV: cell_id,lon,lat,hour,wind_ms,ghi_wm2,temp_c,runoff.
inline WeatherGrid parse_weather_csv(const std::string& text) {
    const CsvTable t = parse_csv(text);
    const int c_id = t.require_column("cell_id"), c_lon = t.require_column("lon"),
              c_lat = t.require_column("lat"), c_hour = t.require_column("hour"),
              c_wind = t.require_column("wind_ms"), c_ghi = t.require_column("ghi_wm2"),
              c_temp = t.require_column("temp_c");
    const int c_runoff = t.column("runoff");

    WeatherGrid grid;
    std::map<std::string, std::size_t> index;
    for (const auto& row : t.rows) {
        const std::string& id = row[static_cast<std::size_t>(c_id)];
        auto it = index.find(id);
        if (it == index.end()) {
            it = index.emplace(id, grid.cells.size()).first;
            grid.cells.push_back({id,
                                  {parse_double(row[static_cast<std::size_t>(c_lon)]).value_or(0),
                                   parse_double(row[static_cast<std::size_t>(c_lat)]).value_or(0)}});
            grid.wind_ms.emplace_back();
            grid.ghi_wm2.emplace_back();
            grid.temp_c.emplace_back();
            grid.runoff.emplace_back();
        }
        const std::size_t c = it->second;
        grid.wind_ms[c].push_back(parse_double(row[static_cast<std::size_t>(c_wind)]).value_or(0));
        grid.ghi_wm2[c].push_back(parse_double(row[static_cast<std::size_t>(c_ghi)]).value_or(0));
        grid.temp_c[c].push_back(parse_double(row[static_cast<std::size_t>(c_temp)]).value_or(0));
        grid.runoff[c].push_back(
            c_runoff >= 0 ? parse_double(row[static_cast<std::size_t>(c_runoff)]).value_or(0) : 0.0);
    }
    if (grid.cells.empty()) throw ParseError("weather CSV contains no cells");
    grid.hours = grid.wind_ms[0].size();
    grid.validate();
    return grid;
}

// -- demand ----------------------------------------------------------------

/// Deterministic demand shape: diurnal weekday/weekend factors plus a
/// seasonal cosine.
struct DemandShape {
    std::array<double, 24> weekday_factor;
    std::array<double, 24> weekend_factor;
    double seasonal_amplitude = 0.0;  // in [0,1)
    int peak_day = 0;

    static DemandShape flat() {
        DemandShape s;
        s.weekday_factor.fill(1.0);
        s.weekend_factor.fill(1.0);
        return s;
    }
};

inline double demand_shape_at(const DemandShape& shape, std::size_t t, int start_weekday) {
    const std::size_t day = t / 24;
    const std::size_t hour = t % 24;
    const int weekday = (start_weekday + static_cast<int>(day)) % 7;  // 0 = Monday
    const bool weekend = weekday >= 5;
    const double diurnal = weekend ? shape.weekend_factor[hour] : shape.weekday_factor[hour];
    const double seasonal =
        1.0 + shape.seasonal_amplitude *
                  std::cos(2.0 * kPi * (static_cast<double>(day) - shape.peak_day) / 365.0);
    return diurnal * seasonal;
}

/// Build hourly demand per region by scaling a shared shape so each
/// region's total energy equals its share of the country's annual
/// energy. Region weights must sum to 1 per country.
inline SeriesTable synth_demand(const std::map<std::string, double>& annual_twh_by_country,
                                const std::map<std::string, double>& region_weights,
                                const std::map<std::string, std::string>& region_country,
                                const DemandShape& shape, std::size_t hours, int start_weekday = 0) {
    if (hours == 0) throw ContractError("synth_demand: hours must be positive");
    if (shape.seasonal_amplitude < 0 || shape.seasonal_amplitude >= 1)
        throw ContractError("synth_demand: seasonal amplitude must be in [0,1)");
    for (double f : shape.weekday_factor)
        if (f <= 0) throw ContractError("synth_demand: shape factors must be positive");
    for (double f : shape.weekend_factor)
        if (f <= 0) throw ContractError("synth_demand: shape factors must be positive");

    std::map<std::string, double> weight_sum;
    for (const auto& [region, w] : region_weights) {
        auto it = region_country.find(region);
        if (it == region_country.end())
            throw ContractError("synth_demand: region " + region + " has no country");
        weight_sum[it->second] += w;
    }
    for (const auto& [country, sum] : weight_sum)
        if (std::abs(sum - 1.0) > 1e-9)
            throw ContractError("synth_demand: region weights for " + country +
                                " sum to " + fmt_double(sum) + ", expected 1");

    std::vector<double> shape_values(hours);
    double shape_total = 0;
    for (std::size_t t = 0; t < hours; ++t) {
        shape_values[t] = demand_shape_at(shape, t, start_weekday);
        shape_total += shape_values[t];
    }

    SeriesTable out;
    out.kind = SeriesKind::demand_mw;
    for (const auto& [region, w] : region_weights) {
        const std::string& country = region_country.at(region);
        auto it = annual_twh_by_country.find(country);
        if (it == annual_twh_by_country.end())
            throw ContractError("synth_demand: no annual energy for country " + country);
        const double annual_mwh = it->second * 1e6;
        std::vector<double> series(hours);
        for (std::size_t t = 0; t < hours; ++t)
            series[t] = annual_mwh * w * shape_values[t] / shape_total;
        out.regions.push_back(region);
        out.values.push_back(std::move(series));
    }
    out.sort_regions();
    return out;
}

// -- renewables --------------------------------------------------------------

struct TurbineCurve {
    double cut_in_ms = 3.0;
    double rated_ms = 12.0;
    double cut_out_ms = 25.0;
};

/// Capacity factor of the cubic-ramp power curve at hub-height wind speed.
inline double wind_cf_at(double v_hub, const TurbineCurve& turbine) {
    if (turbine.cut_in_ms <= 0 || turbine.cut_in_ms >= turbine.rated_ms ||
        turbine.rated_ms >= turbine.cut_out_ms)
        throw ConfigError("wind curve must satisfy 0 < cut_in < rated < cut_out");
    if (v_hub < turbine.cut_in_ms || v_hub > turbine.cut_out_ms) return 0.0;
    if (v_hub >= turbine.rated_ms) return 1.0;
    const double v3 = v_hub * v_hub * v_hub;
    const double ci3 = turbine.cut_in_ms * turbine.cut_in_ms * turbine.cut_in_ms;
    const double r3 = turbine.rated_ms * turbine.rated_ms * turbine.rated_ms;
    return (v3 - ci3) / (r3 - ci3);
}

/// Extrapolate 10 m wind to hub height with the 1/7 power-law shear.
inline double shear_to_hub(double v10, double hub_height_m) {
    return v10 * std::pow(hub_height_m / 10.0, 1.0 / 7.0);
}

/// Hourly wind capacity factors per weather cell.
inline SeriesTable wind_cf(const WeatherGrid& weather, double hub_height_m = 100.0,
                           const TurbineCurve& turbine = {}) {
    SeriesTable out;
    out.kind = SeriesKind::cf_wind;
    for (std::size_t c = 0; c < weather.cells.size(); ++c) {
        std::vector<double> series(weather.hours);
        for (std::size_t t = 0; t < weather.hours; ++t)
            series[t] = wind_cf_at(shear_to_hub(weather.wind_ms[c][t], hub_height_m), turbine);
        out.regions.push_back(weather.cells[c].id);
        out.values.push_back(std::move(series));
    }
    out.sort_regions();
    return out;
}

/// Hourly solar capacity factors per weather cell:
/// cf = clamp((ghi/1000) * (1 + temp_coeff * (temp - 25)), 0, 1).
inline SeriesTable solar_cf(const WeatherGrid& weather, double temp_coeff_per_c = -0.004) {
    SeriesTable out;
    out.kind = SeriesKind::cf_solar;
    for (std::size_t c = 0; c < weather.cells.size(); ++c) {
        std::vector<double> series(weather.hours);
        for (std::size_t t = 0; t < weather.hours; ++t) {
            const double cf = (weather.ghi_wm2[c][t] / 1000.0) *
                              (1.0 + temp_coeff_per_c * (weather.temp_c[c][t] - 25.0));
            series[t] = std::clamp(cf, 0.0, 1.0);
        }
        out.regions.push_back(weather.cells[c].id);
        out.values.push_back(std::move(series));
    }
    out.sort_regions();
    return out;
}

// -- spatial aggregation -------------------------------------------------------

struct RegionalizeReport {
    std::vector<std::string> fallback_regions;  // no weather cell inside; nearest used
};

/// Map per-weather-cell series onto regions: the unweighted mean of the
/// member cells; regions containing no cell take the nearest cell's
/// series.
inline SeriesTable regionalize(const SeriesTable& cell_series,
                               const std::map<std::string, LonLat>& cell_locations,
                               const std::vector<RegionCell>& cells,
                               RegionalizeReport* report = nullptr) {
    if (cell_series.regions.empty()) throw ContractError("regionalize: empty weather grid");

    std::vector<std::size_t> order(cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return cells[a].bus_id < cells[b].bus_id; });

    const std::size_t T = cell_series.hours();
    SeriesTable out;
    out.kind = cell_series.kind;

    for (std::size_t idx : order) {
        const RegionCell& region = cells[idx];
        std::vector<const std::vector<double>*> members;
        for (std::size_t c = 0; c < cell_series.regions.size(); ++c) {
            auto it = cell_locations.find(cell_series.regions[c]);
            if (it == cell_locations.end()) continue;
            if (cell_contains(region, it->second)) members.push_back(&cell_series.values[c]);
        }
        std::vector<double> series(T, 0.0);
        if (!members.empty()) {
            for (const auto* m : members)
                for (std::size_t t = 0; t < T; ++t) series[t] += (*m)[t];
            for (std::size_t t = 0; t < T; ++t) series[t] /= static_cast<double>(members.size());
        } else {
            // nearest cell fallback
            const LonLat centroid = cell_centroid(region);
            std::size_t best = 0;
            double best_km = 1e300;
            for (std::size_t c = 0; c < cell_series.regions.size(); ++c) {
                auto it = cell_locations.find(cell_series.regions[c]);
                if (it == cell_locations.end()) continue;
                const double d = haversine_km(centroid, it->second);
                if (d < best_km) {
                    best_km = d;
                    best = c;
                }
            }
            series = cell_series.values[best];
            if (report) report->fallback_regions.push_back(region.bus_id);
        }
        out.regions.push_back(region.bus_id);
        out.values.push_back(std::move(series));
    }
    return out;
}

}  // namespace gridweaver

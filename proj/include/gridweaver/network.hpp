#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridweaver/csv.hpp"
#include "gridweaver/geo.hpp"
#include "gridweaver/ingest.hpp"

namespace gridweaver {

enum class BusOrigin { substation, virtual_junction };

inline std::string to_string(BusOrigin o) { return o == BusOrigin::substation ? "substation" : "virtual"; }

struct Bus {
    std::string id;
    LonLat location;
    double voltage_kv = 0;
    std::string country;
    BusOrigin origin = BusOrigin::substation;
};

struct Branch {
    std::string id;
    std::string from_bus;
    std::string to_bus;
    double length_km = 0;
    double r_ohm = 0;
    double x_ohm = 0;
    double s_nom_mva = 0;
    int circuits = 1;
    LineStatus status = LineStatus::existing;
};

/// Electrical network graph. Buses and branches are kept sorted by id
/// so every traversal and serialization is deterministic.
struct Network {
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::map<std::string, std::string> metadata;

    void sort_and_validate() {
        std::sort(buses.begin(), buses.end(), [](const Bus& a, const Bus& b) { return a.id < b.id; });
        std::sort(branches.begin(), branches.end(),
                  [](const Branch& a, const Branch& b) { return a.id < b.id; });
        for (std::size_t i = 1; i < buses.size(); ++i)
            if (buses[i].id == buses[i - 1].id) throw ParseError("duplicate bus id: " + buses[i].id);
        for (const Branch& br : branches) {
            if (br.from_bus == br.to_bus) throw ParseError("branch " + br.id + ": from == to");
            if (bus_index(br.from_bus) < 0 || bus_index(br.to_bus) < 0)
                throw ParseError("branch " + br.id + ": endpoint references unknown bus");
        }
    }

    int bus_index(std::string_view id) const {
        auto it = std::lower_bound(buses.begin(), buses.end(), id,
                                   [](const Bus& b, std::string_view v) { return b.id < v; });
        if (it == buses.end() || it->id != id) return -1;
        return static_cast<int>(it - buses.begin());
    }

    const Bus& bus(std::string_view id) const {
        const int i = bus_index(id);
        if (i < 0) throw ContractError("unknown bus id: " + std::string(id));
        return buses[static_cast<std::size_t>(i)];
    }
};

struct BuildReport {
    std::size_t merged_substations = 0;
    std::size_t virtual_buses = 0;
    std::size_t dropped_degenerate_branches = 0;
    std::size_t excluded_planned_lines = 0;
};

struct SnapOptions {
    double snap_tol_km = 2.0;
    bool include_planned = false;
    double default_voltage_kv = 110.0;  // for virtual buses on lines without a voltage tag
};

/// Build a network graph from substations and lines. Line endpoints
/// snap to the nearest substation within tolerance; otherwise a virtual
/// bus is created at the endpoint. Substations at identical coordinates
/// merge, keeping the highest voltage.
inline Network snap_and_build(const std::vector<RawSubstation>& substations,
                              const std::vector<RawLine>& lines, const SnapOptions& opt = {},
                              BuildReport* report = nullptr) {
    if (opt.snap_tol_km < 0) throw ContractError("snap_and_build: snap tolerance must be >= 0");

    Network net;
    net.metadata["builder"] = "snap_and_build";
    net.metadata["snap_tol_km"] = fmt_double(opt.snap_tol_km);

    // merge coincident substations
    std::map<std::pair<double, double>, std::size_t> by_coord;
    std::vector<Bus> station_buses;
    for (const RawSubstation& s : substations) {
        const auto key = std::make_pair(s.location.lon, s.location.lat);
        auto it = by_coord.find(key);
        if (it != by_coord.end()) {
            Bus& existing = station_buses[it->second];
            existing.voltage_kv = std::max(existing.voltage_kv, s.voltage_kv.value_or(0.0));
            if (existing.country.empty()) existing.country = s.country;
            if (report) ++report->merged_substations;
            continue;
        }
        Bus b;
        b.id = s.id;
        b.location = s.location;
        b.voltage_kv = s.voltage_kv.value_or(0.0);
        b.country = s.country;
        b.origin = BusOrigin::substation;
        by_coord.emplace(key, station_buses.size());
        station_buses.push_back(std::move(b));
    }

    auto nearest_station = [&](const LonLat& p) -> std::pair<int, double> {
        int best = -1;
        double best_km = 1e300;
        for (std::size_t i = 0; i < station_buses.size(); ++i) {
            const double d = haversine_km(p, station_buses[i].location);
            if (d < best_km) {
                best_km = d;
                best = static_cast<int>(i);
            }
        }
        return {best, best_km};
    };
    auto nearest_station_country = [&](const LonLat& p) -> std::string {
        std::string country;
        double best_km = 1e300;
        for (const Bus& b : station_buses) {
            if (b.country.empty()) continue;
            const double d = haversine_km(p, b.location);
            if (d < best_km) {
                best_km = d;
                country = b.country;
            }
        }
        return country;
    };

    std::vector<Bus> virtual_buses;
    std::map<std::pair<double, double>, std::size_t> virtual_by_coord;
    auto attach_endpoint = [&](const LonLat& p, double line_kv) -> std::string {
        const auto [idx, dist] = nearest_station(p);
        if (idx >= 0 && dist <= opt.snap_tol_km) return station_buses[static_cast<std::size_t>(idx)].id;
        const auto key = std::make_pair(p.lon, p.lat);
        auto it = virtual_by_coord.find(key);
        if (it != virtual_by_coord.end()) {
            Bus& v = virtual_buses[it->second];
            v.voltage_kv = std::max(v.voltage_kv, line_kv);
            return v.id;
        }
        Bus v;
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "virtual_%04zu", virtual_buses.size());
        v.id = idbuf;
        v.location = p;
        v.voltage_kv = line_kv;
        v.country = nearest_station_country(p);
        v.origin = BusOrigin::virtual_junction;
        virtual_by_coord.emplace(key, virtual_buses.size());
        virtual_buses.push_back(v);
        if (report) ++report->virtual_buses;
        return virtual_buses.back().id;
    };

    std::vector<Branch> branches;
    for (const RawLine& line : lines) {
        if (line.status == LineStatus::planned && !opt.include_planned) {
            if (report) ++report->excluded_planned_lines;
            continue;
        }
        const double kv = line.voltage_kv.value_or(opt.default_voltage_kv);
        Branch br;
        br.id = line.id;
        br.from_bus = attach_endpoint(line.path.front(), kv);
        br.to_bus = attach_endpoint(line.path.back(), kv);
        if (br.from_bus == br.to_bus) {
            if (report) ++report->dropped_degenerate_branches;
            continue;
        }
        br.length_km = polyline_length_km(line.path);
        br.circuits = line.circuits;
        br.status = line.status;
        branches.push_back(std::move(br));
    }

    net.buses = std::move(station_buses);
    net.buses.insert(net.buses.end(), virtual_buses.begin(), virtual_buses.end());
    net.branches = std::move(branches);
    net.sort_and_validate();
    return net;
}

/// Per-km electrical parameters for one voltage class.
struct LineParams {
    double r_ohm_per_km = 0;
    double x_ohm_per_km = 0;
    double s_nom_mva_per_circuit = 0;
};

using LineParamTable = std::map<double, LineParams>;  // keyed by voltage class, kV

/// Typical overhead-line literature values; configuration, not ground truth.
inline LineParamTable default_line_params() {
    return {
        {110.0, {0.12, 0.40, 120.0}},
        {220.0, {0.06, 0.30, 490.0}},
        {330.0, {0.04, 0.30, 700.0}},
        {500.0, {0.03, 0.28, 1500.0}},
    };
}

/// Voltage of a branch, taken as the higher endpoint voltage.
inline double branch_voltage_kv(const Network& net, const Branch& br) {
    return std::max(net.bus(br.from_bus).voltage_kv, net.bus(br.to_bus).voltage_kv);
}

/// Assign impedances and ratings from a voltage-class table. Classes
/// match the nearest table entry at or below the branch voltage, else
/// the lowest class. Parallel circuits divide impedance and multiply
/// the rating. Zero-length branches are rejected (reactance would be 0).
inline Network assign_electrical_params(Network net, const LineParamTable& table) {
    if (table.empty()) throw ConfigError("assign_electrical_params: empty parameter table");
    for (Branch& br : net.branches) {
        const double kv = branch_voltage_kv(net, br);
        auto it = table.upper_bound(kv);
        if (it != table.begin()) --it;
        const LineParams& p = it->second;
        if (br.length_km <= 0)
            throw ParseError("branch " + br.id + ": zero length, reactance would be zero");
        const double circuits = static_cast<double>(br.circuits);
        br.r_ohm = p.r_ohm_per_km * br.length_km / circuits;
        br.x_ohm = p.x_ohm_per_km * br.length_km / circuits;
        br.s_nom_mva = p.s_nom_mva_per_circuit * circuits;
    }
    return net;
}

/// Maximal connected bus sets, largest first; ties broken by smallest
/// member id.
inline std::vector<std::set<std::string>> connected_components(const Network& net) {
    const std::size_t n = net.buses.size();
    std::vector<std::vector<int>> adj(n);
    for (const Branch& br : net.branches) {
        const int a = net.bus_index(br.from_bus);
        const int b = net.bus_index(br.to_bus);
        adj[static_cast<std::size_t>(a)].push_back(b);
        adj[static_cast<std::size_t>(b)].push_back(a);
    }
    std::vector<bool> seen(n, false);
    std::vector<std::set<std::string>> comps;
    for (std::size_t start = 0; start < n; ++start) {
        if (seen[start]) continue;
        std::set<std::string> comp;
        std::vector<int> stack{static_cast<int>(start)};
        seen[start] = true;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            comp.insert(net.buses[static_cast<std::size_t>(v)].id);
            for (int w : adj[static_cast<std::size_t>(v)]) {
                if (!seen[static_cast<std::size_t>(w)]) {
                    seen[static_cast<std::size_t>(w)] = true;
                    stack.push_back(w);
                }
            }
        }
        comps.push_back(std::move(comp));
    }
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
        if (a.size() != b.size()) return a.size() > b.size();
        return *a.begin() < *b.begin();
    });
    return comps;
}

// -- persistence ------------------------------------------------------

inline std::string buses_to_csv(const Network& net) {
    CsvWriter w({"id", "lon", "lat", "voltage_kv", "country", "origin"});
    for (const Bus& b : net.buses)
        w.row({b.id, fmt_double(b.location.lon), fmt_double(b.location.lat), fmt_double(b.voltage_kv),
               b.country, to_string(b.origin)});
    return w.str();
}

inline std::string branches_to_csv(const Network& net) {
    CsvWriter w({"id", "from", "to", "length_km", "r_ohm", "x_ohm", "s_nom_mva", "circuits", "status"});
    for (const Branch& br : net.branches)
        w.row({br.id, br.from_bus, br.to_bus, fmt_double(br.length_km), fmt_double(br.r_ohm),
               fmt_double(br.x_ohm), fmt_double(br.s_nom_mva), std::to_string(br.circuits),
               to_string(br.status)});
    return w.str();
}

inline Network network_from_csv(const std::string& buses_csv, const std::string& branches_csv) {
    Network net;
    {
        const CsvTable t = parse_csv(buses_csv);
        const int c_id = t.require_column("id"), c_lon = t.require_column("lon"),
                  c_lat = t.require_column("lat"), c_kv = t.require_column("voltage_kv"),
                  c_country = t.require_column("country"), c_origin = t.require_column("origin");
        for (const auto& row : t.rows) {
            Bus b;
            b.id = row[static_cast<std::size_t>(c_id)];
            b.location.lon = parse_double(row[static_cast<std::size_t>(c_lon)]).value_or(0);
            b.location.lat = parse_double(row[static_cast<std::size_t>(c_lat)]).value_or(0);
            b.voltage_kv = parse_double(row[static_cast<std::size_t>(c_kv)]).value_or(0);
            b.country = row[static_cast<std::size_t>(c_country)];
            b.origin = row[static_cast<std::size_t>(c_origin)] == "virtual" ? BusOrigin::virtual_junction
                                                                            : BusOrigin::substation;
            net.buses.push_back(std::move(b));
        }
    }
    {
        const CsvTable t = parse_csv(branches_csv);
        const int c_id = t.require_column("id"), c_from = t.require_column("from"),
                  c_to = t.require_column("to"), c_len = t.require_column("length_km"),
                  c_r = t.require_column("r_ohm"), c_x = t.require_column("x_ohm"),
                  c_s = t.require_column("s_nom_mva"), c_circ = t.require_column("circuits"),
                  c_status = t.require_column("status");
        for (const auto& row : t.rows) {
            Branch br;
            br.id = row[static_cast<std::size_t>(c_id)];
            br.from_bus = row[static_cast<std::size_t>(c_from)];
            br.to_bus = row[static_cast<std::size_t>(c_to)];
            br.length_km = parse_double(row[static_cast<std::size_t>(c_len)]).value_or(0);
            br.r_ohm = parse_double(row[static_cast<std::size_t>(c_r)]).value_or(0);
            br.x_ohm = parse_double(row[static_cast<std::size_t>(c_x)]).value_or(0);
            br.s_nom_mva = parse_double(row[static_cast<std::size_t>(c_s)]).value_or(0);
            br.circuits = static_cast<int>(parse_int(row[static_cast<std::size_t>(c_circ)]).value_or(1));
            br.status = parse_line_status(row[static_cast<std::size_t>(c_status)]);
            net.branches.push_back(std::move(br));
        }
    }
    net.sort_and_validate();
    return net;
}

/// GeoJSON rendering of the network for maps: buses as Points,
/// branches as straight LineStrings.
inline std::string network_to_geojson(const Network& net) {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const Bus& b : net.buses) {
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "Point"}, {"coordinates", {b.location.lon, b.location.lat}}};
        f["properties"] = {{"id", b.id},
                           {"voltage_kv", b.voltage_kv},
                           {"country", b.country},
                           {"origin", to_string(b.origin)}};
        features.push_back(std::move(f));
    }
    for (const Branch& br : net.branches) {
        const Bus& a = net.bus(br.from_bus);
        const Bus& b = net.bus(br.to_bus);
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = {{"type", "LineString"},
                         {"coordinates",
                          {{a.location.lon, a.location.lat}, {b.location.lon, b.location.lat}}}};
        f["properties"] = {{"id", br.id},
                           {"s_nom_mva", br.s_nom_mva},
                           {"length_km", br.length_km},
                           {"status", to_string(br.status)}};
        features.push_back(std::move(f));
    }
    nlohmann::ordered_json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = std::move(features);
    return doc.dump();
}

}  // namespace gridweaver

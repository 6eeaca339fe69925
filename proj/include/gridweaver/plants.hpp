#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridweaver/csv.hpp"
#include "gridweaver/geo.hpp"
#include "gridweaver/regions.hpp"

namespace gridweaver {

enum class Fuel { coal, gas, oil, hydro, wind, solar, nuclear, biomass, geothermal };

inline std::string to_string(Fuel f) {
    switch (f) {
        case Fuel::coal: return "coal";
        case Fuel::gas: return "gas";
        case Fuel::oil: return "oil";
        case Fuel::hydro: return "hydro";
        case Fuel::wind: return "wind";
        case Fuel::solar: return "solar";
        case Fuel::nuclear: return "nuclear";
        case Fuel::biomass: return "biomass";
        case Fuel::geothermal: return "geothermal";
    }
    return "unknown";
}

/// Fuel synonym table covering the spellings seen in open databases.
inline std::optional<Fuel> parse_fuel(std::string_view raw) {
    const std::string f = lower(trim(raw));
    if (f == "coal" || f == "hard coal" || f == "lignite" || f == "anthracite") return Fuel::coal;
    if (f == "gas" || f == "natural gas" || f == "ccgt" || f == "ocgt" || f == "lng") return Fuel::gas;
    if (f == "oil" || f == "diesel" || f == "hfo" || f == "fuel oil" || f == "petcoke") return Fuel::oil;
    if (f == "hydro" || f == "hydropower" || f == "water" || f == "run-of-river" || f == "reservoir")
        return Fuel::hydro;
    if (f == "wind" || f == "onshore wind" || f == "offshore wind" || f == "wind onshore") return Fuel::wind;
    if (f == "solar" || f == "pv" || f == "solar pv" || f == "photovoltaic") return Fuel::solar;
    if (f == "nuclear" || f == "uranium") return Fuel::nuclear;
    if (f == "biomass" || f == "bioenergy" || f == "biogas" || f == "waste") return Fuel::biomass;
    if (f == "geothermal") return Fuel::geothermal;
    return std::nullopt;
}

struct PowerPlant {
    std::string name;
    std::string country;
    Fuel fuel = Fuel::coal;
    double capacity_mw = 0;
    LonLat location;
    std::optional<int> year;
    std::string source;
};

struct PlantRejection {
    std::size_t row_index;
    std::string reason;
};

struct PlantParseReport {
    std::vector<PlantRejection> rejected;
};

/// Parse plants from a CSV with columns name,country,fuel,capacity_mw,lat,lon
/// (optional year,source). Rows with unknown fuels, missing coordinates
/// or non-positive capacity are rejected and counted.
inline std::vector<PowerPlant> parse_plants(const CsvTable& table, PlantParseReport* report = nullptr,
                                            const std::string& default_source = "") {
    const int c_name = table.require_column("name");
    const int c_country = table.require_column("country");
    const int c_fuel = table.require_column("fuel");
    const int c_cap = table.require_column("capacity_mw");
    const int c_lat = table.require_column("lat");
    const int c_lon = table.require_column("lon");
    const int c_year = table.column("year");
    const int c_source = table.column("source");

    auto reject = [&](std::size_t i, const std::string& reason) {
        if (report) report->rejected.push_back({i, reason});
    };

    std::vector<PowerPlant> out;
    out.reserve(table.rows.size());
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        PowerPlant p;
        p.name = trim(row[static_cast<std::size_t>(c_name)]);
        p.country = trim(row[static_cast<std::size_t>(c_country)]);
        const auto fuel = parse_fuel(row[static_cast<std::size_t>(c_fuel)]);
        if (!fuel) {
            reject(i, "unknown fuel");
            continue;
        }
        p.fuel = *fuel;
        const auto cap = parse_double(row[static_cast<std::size_t>(c_cap)]);
        if (!cap || *cap <= 0) {
            reject(i, "non-positive capacity");
            continue;
        }
        p.capacity_mw = *cap;
        const auto lat = parse_double(row[static_cast<std::size_t>(c_lat)]);
        const auto lon = parse_double(row[static_cast<std::size_t>(c_lon)]);
        if (!lat || !lon || *lat < -90 || *lat > 90 || *lon < -180 || *lon > 180) {
            reject(i, "missing coordinates");
            continue;
        }
        p.location = {*lon, *lat};
        if (c_year >= 0) {
            const auto y = parse_int(row[static_cast<std::size_t>(c_year)]);
            if (y) p.year = static_cast<int>(*y);
        }
        p.source = c_source >= 0 ? row[static_cast<std::size_t>(c_source)] : default_source;
        out.push_back(std::move(p));
    }
    return out;
}

inline std::vector<PowerPlant> parse_plants_csv(const std::string& csv_text,
                                                PlantParseReport* report = nullptr,
                                                const std::string& default_source = "") {
    return parse_plants(parse_csv(csv_text), report, default_source);
}

// -- name matching -----------------------------------------------------

/// Lowercase, strip punctuation, collapse whitespace.
inline std::string normalize_name(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_space = false;
    for (char ch : raw) {
        const char c = (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch;
        const bool keep = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (keep) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += c;
        } else {
            pending_space = true;
        }
    }
    return out;
}

inline double jaro_similarity(std::string_view s1, std::string_view s2) {
    if (s1 == s2) return 1.0;
    const std::size_t l1 = s1.size(), l2 = s2.size();
    if (l1 == 0 || l2 == 0) return 0.0;
    const std::size_t window = std::max(l1, l2) / 2 == 0 ? 0 : std::max(l1, l2) / 2 - 1;

    std::vector<bool> m1(l1, false), m2(l2, false);
    std::size_t matches = 0;
    for (std::size_t i = 0; i < l1; ++i) {
        const std::size_t lo = i > window ? i - window : 0;
        const std::size_t hi = std::min(l2, i + window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
            if (!m2[j] && s2[j] == s1[i]) {
                m1[i] = m2[j] = true;
                ++matches;
                break;
            }
        }
    }
    if (matches == 0) return 0.0;

    std::size_t transpositions = 0, k = 0;
    for (std::size_t i = 0; i < l1; ++i) {
        if (!m1[i]) continue;
        while (!m2[k]) ++k;
        if (s1[i] != s2[k]) ++transpositions;
        ++k;
    }
    const double m = static_cast<double>(matches);
    const double t = static_cast<double>(transpositions) / 2.0;
    return (m / static_cast<double>(l1) + m / static_cast<double>(l2) + (m - t) / m) / 3.0;
}

/// Jaro-Winkler with the standard prefix scale 0.1, prefix capped at 4.
inline double jaro_winkler(std::string_view s1, std::string_view s2) {
    const double j = jaro_similarity(s1, s2);
    std::size_t prefix = 0;
    for (std::size_t i = 0; i < std::min({s1.size(), s2.size(), std::size_t{4}}); ++i) {
        if (s1[i] != s2[i]) break;
        ++prefix;
    }
    return j + static_cast<double>(prefix) * 0.1 * (1.0 - j);
}

struct MatchOptions {
    double name_threshold = 0.85;
    double dist_km = 10.0;
    bool prefer_b = false;  // source priority: which record wins location/capacity conflicts
};

struct MatchRecord {
    std::size_t a_index;
    std::size_t b_index;
    double similarity;
    double distance_km;
    std::string action;  // "merged-mean" or "merged-priority"
};

struct MatchReport {
    std::vector<MatchRecord> matches;

    std::string to_csv() const {
        CsvWriter w({"a_id", "b_id", "similarity", "distance_km", "action"});
        for (const auto& m : matches)
            w.row({"a" + std::to_string(m.a_index), "b" + std::to_string(m.b_index),
                   fmt_double(m.similarity), fmt_double(m.distance_km), m.action});
        return w.str();
    }
};

/// Merge two plant databases. Records match when country and fuel
/// agree, they lie within dist_km, and the normalized names reach the
/// Jaro-Winkler threshold. Matching is one-to-one, greedy by descending
/// similarity (deterministic; documented as approximate, not optimal
/// bipartite matching). Matched capacities average when within 20%
/// relative, otherwise the priority source wins.
inline std::vector<PowerPlant> match_plants(const std::vector<PowerPlant>& a,
                                            const std::vector<PowerPlant>& b,
                                            const MatchOptions& opt = {},
                                            MatchReport* report = nullptr) {
    if (opt.name_threshold < 0 || opt.name_threshold > 1)
        throw ContractError("match_plants: name_threshold must be in [0,1]");
    if (opt.dist_km < 0) throw ContractError("match_plants: dist_km must be >= 0");

    struct Candidate {
        double similarity;
        double distance_km;
        std::size_t ia, ib;
    };
    std::vector<std::string> norm_a(a.size()), norm_b(b.size());
    for (std::size_t i = 0; i < a.size(); ++i) norm_a[i] = normalize_name(a[i].name);
    for (std::size_t i = 0; i < b.size(); ++i) norm_b[i] = normalize_name(b[i].name);

    std::vector<Candidate> candidates;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (a[i].country != b[j].country || a[i].fuel != b[j].fuel) continue;
            const double d = haversine_km(a[i].location, b[j].location);
            if (d > opt.dist_km) continue;
            const double sim = jaro_winkler(norm_a[i], norm_b[j]);
            if (sim < opt.name_threshold) continue;
            candidates.push_back({sim, d, i, j});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        if (x.similarity != y.similarity) return x.similarity > y.similarity;
        if (x.distance_km != y.distance_km) return x.distance_km < y.distance_km;
        if (x.ia != y.ia) return x.ia < y.ia;
        return x.ib < y.ib;
    });

    std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
    std::vector<PowerPlant> merged;
    merged.reserve(a.size() + b.size());
    for (const Candidate& c : candidates) {
        if (used_a[c.ia] || used_b[c.ib]) continue;
        used_a[c.ia] = used_b[c.ib] = true;

        const PowerPlant& pa = a[c.ia];
        const PowerPlant& pb = b[c.ib];
        const PowerPlant& priority = opt.prefer_b ? pb : pa;
        PowerPlant m = priority;
        const double rel = std::abs(pa.capacity_mw - pb.capacity_mw) /
                           std::max(pa.capacity_mw, pb.capacity_mw);
        std::string action;
        if (rel <= 0.20) {
            m.capacity_mw = (pa.capacity_mw + pb.capacity_mw) / 2.0;
            action = "merged-mean";
        } else {
            m.capacity_mw = priority.capacity_mw;
            action = "merged-priority";
        }
        m.source = pa.source + "+" + pb.source;
        if (!m.year && (pa.year || pb.year)) m.year = pa.year ? pa.year : pb.year;
        merged.push_back(std::move(m));
        if (report) report->matches.push_back({c.ia, c.ib, c.similarity, c.distance_km, action});
    }
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!used_a[i]) merged.push_back(a[i]);
    for (std::size_t j = 0; j < b.size(); ++j)
        if (!used_b[j]) merged.push_back(b[j]);
    return merged;
}

// -- spatial assignment --------------------------------------------------

struct AssignReport {
    std::size_t outside_cells = 0;  // assigned to nearest cell with a warning
};

/// Sum plant capacity per (bus, fuel). Plants map to the cell containing
/// their point; ties on shared boundaries go to the lexicographically
/// smaller bus id; plants outside all cells go to the nearest cell.
inline std::map<std::string, std::map<std::string, double>> assign_to_regions(
    const std::vector<PowerPlant>& plants, const std::vector<RegionCell>& cells,
    AssignReport* report = nullptr) {
    if (cells.empty()) throw ContractError("assign_to_regions: no cells");

    std::vector<std::size_t> order(cells.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return cells[x].bus_id < cells[y].bus_id; });

    std::map<std::string, std::map<std::string, double>> out;
    for (const PowerPlant& p : plants) {
        const RegionCell* target = nullptr;
        // scan in bus-id order so boundary ties resolve to the smaller id
        for (std::size_t idx : order) {
            if (cell_contains(cells[idx], p.location)) {
                target = &cells[idx];
                break;
            }
        }
        if (!target) {
            double best = 1e300;
            for (std::size_t idx : order) {
                if (cells[idx].polygons.empty()) continue;
                const double d = haversine_km(p.location, cell_centroid(cells[idx]));
                if (d < best) {
                    best = d;
                    target = &cells[idx];
                }
            }
            if (report) ++report->outside_cells;
        }
        if (!target) throw ContractError("assign_to_regions: all cells empty");
        out[target->bus_id][to_string(p.fuel)] += p.capacity_mw;
    }
    return out;
}

// -- hydro ---------------------------------------------------------------

/// Spread an annual energy budget over a runoff profile:
/// inflow(t) = annual * runoff(t) / sum(runoff). Invariant to scaling
/// of the runoff series.
inline std::vector<double> hydro_inflow(const std::vector<double>& runoff, double annual_energy_mwh) {
    if (runoff.empty()) throw ContractError("hydro_inflow: empty runoff series");
    double total = 0;
    for (double r : runoff) {
        if (r < 0) throw ContractError("hydro_inflow: negative runoff");
        total += r;
    }
    if (total <= 0) throw ContractError("hydro_inflow: all-zero runoff");
    std::vector<double> inflow(runoff.size());
    for (std::size_t t = 0; t < runoff.size(); ++t)
        inflow[t] = annual_energy_mwh * runoff[t] / total;
    return inflow;
}

}  // namespace gridweaver

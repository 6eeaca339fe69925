#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridweaver/expansion.hpp"
#include "gridweaver/network.hpp"
#include "gridweaver/regions.hpp"

namespace gridweaver {

inline const std::map<std::string, std::string>& tech_palette() {
    static const std::map<std::string, std::string> palette{
        {"coal", "#4d4d4d"},    {"gas", "#ff8c00"},       {"oil", "#8b4513"},
        {"hydro", "#1e90ff"},   {"wind", "#2e8b57"},      {"solar", "#e6b800"},
        {"nuclear", "#a020f0"}, {"biomass", "#6b8e23"},   {"geothermal", "#b22222"},
        {"battery", "#20b2aa"},
    };
    return palette;
}

inline std::string tech_color(const std::string& tech) {
    auto it = tech_palette().find(tech);
    return it != tech_palette().end() ? it->second : "#999999";
}

/// Static SVG map: region cell outlines, branches as lines with width
/// proportional to rating, buses as circles with radius proportional to
/// installed (existing plus built) capacity and colored by the largest
/// technology. When a solution is supplied the legend lists each
/// technology present exactly once. Byte-deterministic for fixed inputs.
inline std::string render_map(const Network& net, const std::vector<RegionCell>& cells,
                              const ExpansionProblem* problem = nullptr,
                              const ExpansionSolution* solution = nullptr) {
    if (net.buses.empty()) throw ContractError("render_map: empty network");

    double min_lon = 1e300, max_lon = -1e300, min_lat = 1e300, max_lat = -1e300;
    auto grow = [&](const LonLat& p) {
        min_lon = std::min(min_lon, p.lon);
        max_lon = std::max(max_lon, p.lon);
        min_lat = std::min(min_lat, p.lat);
        max_lat = std::max(max_lat, p.lat);
    };
    for (const Bus& b : net.buses) grow(b.location);
    for (const RegionCell& c : cells)
        for (const auto& ring : c.polygons)
            for (const LonLat& p : ring) grow(p);
    const double span_lon = std::max(1e-6, max_lon - min_lon);
    const double span_lat = std::max(1e-6, max_lat - min_lat);

    const double W = 800, H = 600, margin = 40;
    auto sx = [&](double lon) {
        return margin + (lon - min_lon) / span_lon * (W - 2 * margin);
    };
    auto sy = [&](double lat) {
        return H - margin - (lat - min_lat) / span_lat * (H - 2 * margin);
    };

    // installed capacity per bus and tech
    std::map<std::string, std::map<std::string, double>> capacity;
    if (problem) {
        capacity = problem->existing;
        if (solution)
            for (const auto& [bus, techs] : solution->built_mw)
                for (const auto& [tech, mw] : techs) capacity[bus][tech] += mw;
    }
    double max_cap = 0, max_snom = 0;
    for (const auto& [bus, techs] : capacity) {
        double total = 0;
        for (const auto& [tech, mw] : techs) total += mw;
        max_cap = std::max(max_cap, total);
    }
    for (const Branch& br : net.branches) max_snom = std::max(max_snom, br.s_nom_mva);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt_double(W) + "\" height=\"" +
           fmt_double(H) + "\" viewBox=\"0 0 " + fmt_double(W) + " " + fmt_double(H) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

    for (const RegionCell& c : cells) {
        for (const auto& ring : c.polygons) {
            if (ring.size() < 3) continue;
            std::string d = "M";
            for (std::size_t i = 0; i < ring.size(); ++i) {
                d += fmt_double(sx(ring[i].lon)) + " " + fmt_double(sy(ring[i].lat));
                d += i + 1 < ring.size() ? " L" : " Z";
            }
            svg += "<path d=\"" + d + "\" fill=\"none\" stroke=\"#c8c8c8\" stroke-width=\"0.7\"/>\n";
        }
    }

    for (const Branch& br : net.branches) {
        const Bus& a = net.bus(br.from_bus);
        const Bus& b = net.bus(br.to_bus);
        const double width = max_snom > 0 ? 0.8 + 3.2 * br.s_nom_mva / max_snom : 1.0;
        const std::string color = br.status == LineStatus::planned ? "#4169e1" : "#707070";
        svg += "<line x1=\"" + fmt_double(sx(a.location.lon)) + "\" y1=\"" +
               fmt_double(sy(a.location.lat)) + "\" x2=\"" + fmt_double(sx(b.location.lon)) +
               "\" y2=\"" + fmt_double(sy(b.location.lat)) + "\" stroke=\"" + color +
               "\" stroke-width=\"" + fmt_double(width) + "\"/>\n";
    }

    for (const Bus& b : net.buses) {
        double total = 0;
        std::string top_tech;
        double top_mw = -1;
        if (auto it = capacity.find(b.id); it != capacity.end())
            for (const auto& [tech, mw] : it->second) {
                total += mw;
                if (mw > top_mw) {
                    top_mw = mw;
                    top_tech = tech;
                }
            }
        const double r = max_cap > 0 ? 3.0 + 12.0 * total / max_cap : 4.0;
        const std::string fill = top_tech.empty() ? "#b0b0b0" : tech_color(top_tech);
        svg += "<circle cx=\"" + fmt_double(sx(b.location.lon)) + "\" cy=\"" +
               fmt_double(sy(b.location.lat)) + "\" r=\"" + fmt_double(r) + "\" fill=\"" + fill +
               "\" stroke=\"#303030\" stroke-width=\"0.6\"/>\n";
    }

    if (solution) {
        std::set<std::string> techs;
        for (const auto& [bus, t] : problem ? problem->existing : capacity)
            for (const auto& [tech, mw] : t)
                if (mw > 0) techs.insert(tech);
        for (const auto& [bus, t] : solution->built_mw)
            for (const auto& [tech, mw] : t)
                if (mw > 0) techs.insert(tech);
        double ly = margin;
        for (const auto& tech : techs) {
            svg += "<rect x=\"" + fmt_double(W - 150) + "\" y=\"" + fmt_double(ly) +
                   "\" width=\"12\" height=\"12\" fill=\"" + tech_color(tech) + "\"/>\n";
            svg += "<text x=\"" + fmt_double(W - 132) + "\" y=\"" + fmt_double(ly + 10) +
                   "\" font-size=\"12\" font-family=\"sans-serif\">" + tech + "</text>\n";
            ly += 18;
        }
    }

    svg += "</svg>\n";
    return svg;
}

}  // namespace gridweaver

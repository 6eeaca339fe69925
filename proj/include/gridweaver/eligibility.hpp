#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gridweaver/csv.hpp"
#include "gridweaver/geo.hpp"
#include "gridweaver/regions.hpp"

namespace gridweaver {

enum class RasterKind { landcover, protected_area, population_density, elevation };

inline std::string to_string(RasterKind k) {
    switch (k) {
        case RasterKind::landcover: return "landcover";
        case RasterKind::protected_area: return "protected";
        case RasterKind::population_density: return "population_density";
        case RasterKind::elevation: return "elevation_bathymetry";
    }
    return "unknown";
}

/// Uniform lon/lat grid, row-major, cell centers at
/// (lon0 + i*spacing, lat0 + j*spacing). Missing cells hold NaN.
struct RasterLayer {
    RasterKind kind = RasterKind::landcover;
    double lon0 = 0, lat0 = 0;
    double spacing_deg = 0.01;
    std::size_t nx = 0, ny = 0;
    std::vector<double> values;  // nx * ny, row-major per latitude row

    double& at(std::size_t i, std::size_t j) { return values[j * nx + i]; }
    double at(std::size_t i, std::size_t j) const { return values[j * nx + i]; }

    LonLat center(std::size_t i, std::size_t j) const {
        return {lon0 + static_cast<double>(i) * spacing_deg,
                lat0 + static_cast<double>(j) * spacing_deg};
    }

    /// Nearest-cell lookup; nullopt outside the grid or on missing cells.
    std::optional<double> sample(const LonLat& p) const {
        const double fi = (p.lon - lon0) / spacing_deg;
        const double fj = (p.lat - lat0) / spacing_deg;
        const long i = std::lround(fi), j = std::lround(fj);
        if (i < 0 || j < 0 || i >= static_cast<long>(nx) || j >= static_cast<long>(ny))
            return std::nullopt;
        const double v = at(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        if (std::isnan(v)) return std::nullopt;
        return v;
    }
};

/// Parse `lon,lat,value` rows onto a uniform grid with the given spacing
/// (the spacing comes from the layer's sidecar). Cell positions are
/// snapped to the grid, so row order does not matter.
inline RasterLayer parse_raster_csv(const std::string& text, double spacing_deg, RasterKind kind) {
    if (spacing_deg <= 0) throw ConfigError("raster spacing must be positive");
    const CsvTable t = parse_csv(text);
    const int c_lon = t.require_column("lon"), c_lat = t.require_column("lat"),
              c_val = t.require_column("value");

    double min_lon = 1e300, min_lat = 1e300, max_lon = -1e300, max_lat = -1e300;
    std::vector<std::pair<LonLat, double>> pts;
    pts.reserve(t.rows.size());
    for (const auto& row : t.rows) {
        const auto lon = parse_double(row[static_cast<std::size_t>(c_lon)]);
        const auto lat = parse_double(row[static_cast<std::size_t>(c_lat)]);
        const auto val = parse_double(row[static_cast<std::size_t>(c_val)]);
        if (!lon || !lat || !val) throw ParseError("raster: malformed row");
        pts.push_back({{*lon, *lat}, *val});
        min_lon = std::min(min_lon, *lon);
        max_lon = std::max(max_lon, *lon);
        min_lat = std::min(min_lat, *lat);
        max_lat = std::max(max_lat, *lat);
    }
    if (pts.empty()) throw ParseError("raster: no cells");

    RasterLayer layer;
    layer.kind = kind;
    layer.spacing_deg = spacing_deg;
    layer.lon0 = min_lon;
    layer.lat0 = min_lat;
    layer.nx = static_cast<std::size_t>(std::lround((max_lon - min_lon) / spacing_deg)) + 1;
    layer.ny = static_cast<std::size_t>(std::lround((max_lat - min_lat) / spacing_deg)) + 1;
    layer.values.assign(layer.nx * layer.ny, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [p, v] : pts) {
        const auto i = static_cast<std::size_t>(std::lround((p.lon - min_lon) / spacing_deg));
        const auto j = static_cast<std::size_t>(std::lround((p.lat - min_lat) / spacing_deg));
        layer.at(i, j) = v;
    }
    return layer;
}

inline std::string raster_to_csv(const RasterLayer& layer) {
    CsvWriter w({"lon", "lat", "value"});
    for (std::size_t j = 0; j < layer.ny; ++j)
        for (std::size_t i = 0; i < layer.nx; ++i) {
            const double v = layer.at(i, j);
            if (std::isnan(v)) continue;
            const LonLat c = layer.center(i, j);
            w.row({fmt_double(c.lon), fmt_double(c.lat), fmt_double(v)});
        }
    return w.str();
}

struct ExclusionRuleSet {
    std::set<int> excluded_landcover_codes;
    bool protected_excluded = false;
    std::optional<double> max_population_density;  // persons/km^2
    std::optional<double> max_water_depth_m;       // offshore depth limit
    double buffer_km = 0;

    void validate() const {
        if (max_population_density && *max_population_density < 0)
            throw ConfigError("max_population_density must be >= 0");
        if (max_water_depth_m && *max_water_depth_m <= 0)
            throw ConfigError("max_water_depth_m must be > 0");
        if (buffer_km < 0) throw ConfigError("buffer_km must be >= 0");
    }
};

using RasterStack = std::map<RasterKind, RasterLayer>;

struct EligibilityResult {
    double fraction = 0;          // in [0,1]
    double eligible_area_km2 = 0;
    std::size_t total_cells = 0;
    std::size_t eligible_cells = 0;
    std::size_t missing_cells = 0;  // no layer coverage, treated as ineligible
};

namespace detail {

inline const RasterLayer& evaluation_layer(const RasterStack& layers) {
    for (RasterKind k : {RasterKind::landcover, RasterKind::protected_area,
                         RasterKind::population_density, RasterKind::elevation}) {
        auto it = layers.find(k);
        if (it != layers.end()) return it->second;
    }
    throw ConfigError("eligible_fraction: no raster layers supplied");
}

}  // namespace detail

/// Fraction of a region's area remaining after the exclusion rules,
/// evaluated by counting raster cells inside the region. A cell is
/// eligible iff its land-cover code is not excluded, it is not
/// protected (when the flag is set), population density is at or below
/// the threshold, and water depth is within the offshore limit. Cells
/// lacking coverage in a rule-relevant layer are ineligible and counted.
inline EligibilityResult eligible_fraction(const RegionCell& region, const RasterStack& layers,
                                           const ExclusionRuleSet& rules) {
    rules.validate();
    const RasterLayer& grid = detail::evaluation_layer(layers);

    const RasterLayer* landcover = nullptr;
    const RasterLayer* protected_layer = nullptr;
    const RasterLayer* population = nullptr;
    const RasterLayer* elevation = nullptr;
    if (auto it = layers.find(RasterKind::landcover); it != layers.end()) landcover = &it->second;
    if (auto it = layers.find(RasterKind::protected_area); it != layers.end())
        protected_layer = &it->second;
    if (auto it = layers.find(RasterKind::population_density); it != layers.end())
        population = &it->second;
    if (auto it = layers.find(RasterKind::elevation); it != layers.end()) elevation = &it->second;

    // exclusion mask over the whole evaluation grid (so that buffers
    // reach across the region border), missing-coverage tracked separately
    const std::size_t nx = grid.nx, ny = grid.ny;
    std::vector<char> excluded(nx * ny, 0);
    std::vector<char> missing(nx * ny, 0);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const LonLat c = grid.center(i, j);
            bool ex = false, miss = false;
            auto need = [&](const RasterLayer* layer) -> std::optional<double> {
                if (!layer) {
                    miss = true;
                    return std::nullopt;
                }
                const auto v = layer->sample(c);
                if (!v) miss = true;
                return v;
            };
            if (!rules.excluded_landcover_codes.empty()) {
                if (const auto v = need(landcover))
                    ex = ex || rules.excluded_landcover_codes.count(static_cast<int>(std::lround(*v))) > 0;
            }
            if (rules.protected_excluded) {
                if (const auto v = need(protected_layer)) ex = ex || *v > 0.5;
            }
            if (rules.max_population_density) {
                if (const auto v = need(population)) ex = ex || *v > *rules.max_population_density;
            }
            if (rules.max_water_depth_m) {
                if (const auto v = need(elevation)) ex = ex || -*v > *rules.max_water_depth_m;
            }
            excluded[j * nx + i] = ex ? 1 : 0;
            missing[j * nx + i] = miss ? 1 : 0;
        }
    }

    // discrete dilation: cells within buffer_km of an excluded cell are excluded
    if (rules.buffer_km > 0) {
        const double mid_lat = grid.lat0 + grid.spacing_deg * static_cast<double>(ny) / 2.0;
        const double km_x = grid.spacing_deg * kEarthRadiusKm * kPi / 180.0 * std::cos(deg2rad(mid_lat));
        const double km_y = grid.spacing_deg * kEarthRadiusKm * kPi / 180.0;
        const long rx = static_cast<long>(std::floor(rules.buffer_km / km_x));
        const long ry = static_cast<long>(std::floor(rules.buffer_km / km_y));
        std::vector<char> dilated = excluded;
        for (std::size_t j = 0; j < ny; ++j)
            for (std::size_t i = 0; i < nx; ++i) {
                if (!excluded[j * nx + i]) continue;
                for (long dj = -ry; dj <= ry; ++dj)
                    for (long di = -rx; di <= rx; ++di) {
                        const double dx = static_cast<double>(di) * km_x;
                        const double dy = static_cast<double>(dj) * km_y;
                        if (dx * dx + dy * dy > rules.buffer_km * rules.buffer_km) continue;
                        const long ii = static_cast<long>(i) + di, jj = static_cast<long>(j) + dj;
                        if (ii < 0 || jj < 0 || ii >= static_cast<long>(nx) || jj >= static_cast<long>(ny))
                            continue;
                        dilated[static_cast<std::size_t>(jj) * nx + static_cast<std::size_t>(ii)] = 1;
                    }
            }
        excluded.swap(dilated);
    }

    EligibilityResult res;
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            if (!cell_contains(region, grid.center(i, j))) continue;
            ++res.total_cells;
            if (missing[j * nx + i]) {
                ++res.missing_cells;
                continue;
            }
            if (!excluded[j * nx + i]) ++res.eligible_cells;
        }
    }
    if (res.total_cells == 0)
        throw ConfigError("eligible_fraction: no raster cells inside region " + region.bus_id +
                          "; supply a finer raster");
    res.fraction = static_cast<double>(res.eligible_cells) / static_cast<double>(res.total_cells);
    res.eligible_area_km2 = res.fraction * region.area_km2;
    return res;
}

/// Installable capacity from an eligible area and a deployment density.
inline double potential_mw(double eligible_area_km2, double density_mw_per_km2) {
    if (eligible_area_km2 < 0 || density_mw_per_km2 < 0)
        throw ContractError("potential_mw: arguments must be non-negative");
    return eligible_area_km2 * density_mw_per_km2;
}

/// Population estimate inside a cell: mean sampled density times area.
/// Used as the default clustering/demand weight.
inline double population_in_cell(const RegionCell& region, const RasterLayer& density) {
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t j = 0; j < density.ny; ++j)
        for (std::size_t i = 0; i < density.nx; ++i) {
            const double v = density.at(i, j);
            if (std::isnan(v)) continue;
            if (!cell_contains(region, density.center(i, j))) continue;
            sum += v;
            ++n;
        }
    if (n == 0) return 0.0;
    return sum / static_cast<double>(n) * region.area_km2;
}

}  // namespace gridweaver

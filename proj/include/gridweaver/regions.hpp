#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridweaver/geo.hpp"
#include "gridweaver/network.hpp"

namespace gridweaver {

/// Service area of one bus: a Voronoi cell clipped to its country,
/// or, after aggregation, the union of member cells (kept as a
/// multipolygon of interior-disjoint rings).
struct RegionCell {
    std::string bus_id;
    std::string country;
    std::vector<LonLatRing> polygons;
    double area_km2 = 0;
};

struct VoronoiOptions {
    double duplicate_perturb_deg = 1e-9;
};

struct VoronoiSeed {
    std::string bus_id;
    LonLat location;
};

/// Planar Voronoi diagram of the seeds, computed in an equirectangular
/// projection about the polygon's vertex mean and clipped to the
/// country polygon. Each seed gets a cell; seeds whose cell is entirely
/// outside the polygon get an empty cell with zero area.
inline std::vector<RegionCell> build_voronoi(const LonLatRing& country_polygon,
                                             const std::string& country,
                                             const std::vector<VoronoiSeed>& seeds,
                                             const VoronoiOptions& opt = {},
                                             std::size_t* duplicate_warnings = nullptr) {
    if (seeds.empty()) throw ContractError("build_voronoi: at least one seed required");
    if (country_polygon.size() < 3) throw ContractError("build_voronoi: polygon needs >= 3 vertices");

    LonLat mean{0, 0};
    for (const LonLat& p : country_polygon) {
        mean.lon += p.lon;
        mean.lat += p.lat;
    }
    mean.lon /= static_cast<double>(country_polygon.size());
    mean.lat /= static_cast<double>(country_polygon.size());
    const Projection proj(mean);

    Ring poly;
    poly.reserve(country_polygon.size());
    for (const LonLat& p : country_polygon) poly.push_back(proj.to_xy(p));

    // deduplicate seed points by nudging repeats
    std::vector<XY> pts;
    pts.reserve(seeds.size());
    std::set<std::pair<double, double>> used;
    for (const VoronoiSeed& s : seeds) {
        LonLat loc = s.location;
        while (used.count({loc.lon, loc.lat})) {
            loc.lon += opt.duplicate_perturb_deg;
            if (duplicate_warnings) ++(*duplicate_warnings);
        }
        used.insert({loc.lon, loc.lat});
        pts.push_back(proj.to_xy(loc));
    }

    std::vector<RegionCell> cells;
    cells.reserve(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        Ring cell = poly;
        for (std::size_t j = 0; j < seeds.size() && !cell.empty(); ++j) {
            if (j == i) continue;
            // closer to seed i than seed j: 2(sj-si)·p <= |sj|^2 - |si|^2
            const double nx = 2 * (pts[j].x - pts[i].x);
            const double ny = 2 * (pts[j].y - pts[i].y);
            const double c = pts[j].x * pts[j].x + pts[j].y * pts[j].y - pts[i].x * pts[i].x -
                             pts[i].y * pts[i].y;
            cell = clip_halfplane(cell, nx, ny, c);
        }
        RegionCell rc;
        rc.bus_id = seeds[i].bus_id;
        rc.country = country;
        rc.area_km2 = ring_area(cell);
        if (cell.size() >= 3) {
            LonLatRing ring;
            ring.reserve(cell.size());
            for (const XY& p : cell) ring.push_back(proj.to_lonlat(p));
            rc.polygons.push_back(std::move(ring));
        }
        cells.push_back(std::move(rc));
    }
    return cells;
}

inline bool cell_contains(const RegionCell& cell, const LonLat& p) {
    if (cell.polygons.empty()) return false;
    LonLat mean{0, 0};
    std::size_t n = 0;
    for (const auto& ring : cell.polygons)
        for (const LonLat& v : ring) {
            mean.lon += v.lon;
            mean.lat += v.lat;
            ++n;
        }
    mean.lon /= static_cast<double>(n);
    mean.lat /= static_cast<double>(n);
    const Projection proj(mean);
    const XY q = proj.to_xy(p);
    for (const auto& ring : cell.polygons) {
        Ring r;
        r.reserve(ring.size());
        for (const LonLat& v : ring) r.push_back(proj.to_xy(v));
        if (point_in_ring(q, r)) return true;
    }
    return false;
}

inline LonLat cell_centroid(const RegionCell& cell) {
    if (cell.polygons.empty()) return {};
    LonLat mean{0, 0};
    std::size_t n = 0;
    for (const auto& ring : cell.polygons)
        for (const LonLat& v : ring) {
            mean.lon += v.lon;
            mean.lat += v.lat;
            ++n;
        }
    mean.lon /= static_cast<double>(n);
    mean.lat /= static_cast<double>(n);
    const Projection proj(mean);
    double area_sum = 0;
    XY acc{0, 0};
    for (const auto& ring : cell.polygons) {
        Ring r;
        r.reserve(ring.size());
        for (const LonLat& v : ring) r.push_back(proj.to_xy(v));
        const double a = ring_area(r);
        const XY c = ring_centroid(r);
        acc.x += c.x * a;
        acc.y += c.y * a;
        area_sum += a;
    }
    if (area_sum <= 0) return mean;
    return proj.to_lonlat({acc.x / area_sum, acc.y / area_sum});
}

// -- weighted k-means --------------------------------------------------

struct ClusterMap {
    std::map<std::string, int> assignment;  // bus_id -> cluster id, dense in [0,k)
    int k = 0;
    std::uint64_t seed = 0;
    double inertia = 0;
    std::vector<double> inertia_history;  // one entry per Lloyd iteration
};

struct KMeansPoint {
    std::string id;
    XY pos;
    double weight = 1.0;
};

struct KMeansResult {
    std::vector<int> assignment;  // parallel to input points
    std::vector<XY> centers;
    double inertia = 0;
    std::vector<double> inertia_history;
    bool weights_fallback = false;  // all-zero weights replaced by unit weights
};

namespace detail {

/// One Lloyd run with k-means++ initialization under the given seed.
inline KMeansResult kmeans_single(const std::vector<KMeansPoint>& points, int k, std::uint64_t seed,
                                  int max_iter, double rel_tol) {
    const std::size_t n = points.size();
    if (k < 1 || static_cast<std::size_t>(k) > n)
        throw ContractError("kmeans: k must be in [1, number of points]");

    KMeansResult res;
    std::vector<double> w(n);
    double wsum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (points[i].weight < 0) throw ContractError("kmeans: negative weight");
        w[i] = points[i].weight;
        wsum += w[i];
    }
    if (wsum <= 0) {
        std::fill(w.begin(), w.end(), 1.0);
        res.weights_fallback = true;
    }

    Rng rng(seed);
    auto weighted_pick = [&](const std::vector<double>& scores) -> std::size_t {
        double total = 0;
        for (double s : scores) total += s;
        if (total <= 0) {
            for (std::size_t i = 0; i < scores.size(); ++i)
                if (w[i] > 0) return i;
            return 0;
        }
        const double r = rng.next_double() * total;
        double acc = 0;
        for (std::size_t i = 0; i + 1 < scores.size(); ++i) {
            acc += scores[i];
            if (r < acc) return i;
        }
        return scores.size() - 1;
    };

    // k-means++ seeding
    std::vector<XY> centers;
    centers.reserve(static_cast<std::size_t>(k));
    centers.push_back(points[weighted_pick(w)].pos);
    std::vector<double> d2(n);
    while (centers.size() < static_cast<std::size_t>(k)) {
        std::vector<double> scores(n);
        for (std::size_t i = 0; i < n; ++i) {
            double best = 1e300;
            for (const XY& c : centers) best = std::min(best, dist2(points[i].pos, c));
            d2[i] = best;
            scores[i] = w[i] * best;
        }
        std::size_t pick = weighted_pick(scores);
        if (scores[pick] <= 0) {  // all remaining mass on chosen centers: take first unused point
            for (std::size_t i = 0; i < n; ++i)
                if (d2[i] > 0 || scores[i] > 0) { pick = i; break; }
        }
        centers.push_back(points[pick].pos);
    }

    std::vector<int> assign(n, 0);
    double prev_inertia = -1;
    for (int iter = 0; iter < max_iter; ++iter) {
        // assignment step
        double inertia = 0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = dist2(points[i].pos, centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = dist2(points[i].pos, centers[static_cast<std::size_t>(c)]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            assign[i] = best;
            inertia += w[i] * best_d;
        }
        res.inertia_history.push_back(inertia);

        // update step
        std::vector<double> cw(static_cast<std::size_t>(k), 0);
        std::vector<XY> acc(static_cast<std::size_t>(k), XY{0, 0});
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(assign[i]);
            cw[c] += w[i];
            acc[c].x += w[i] * points[i].pos.x;
            acc[c].y += w[i] * points[i].pos.y;
        }
        for (int c = 0; c < k; ++c) {
            const auto ci = static_cast<std::size_t>(c);
            if (cw[ci] > 0) {
                centers[ci] = {acc[ci].x / cw[ci], acc[ci].y / cw[ci]};
            } else {
                // re-seed an empty cluster at the worst-served point
                std::size_t worst = 0;
                double worst_d = -1;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = w[i] * dist2(points[i].pos, centers[static_cast<std::size_t>(assign[i])]);
                    if (d > worst_d) {
                        worst_d = d;
                        worst = i;
                    }
                }
                centers[ci] = points[worst].pos;
            }
        }

        if (prev_inertia >= 0) {
            const double change = std::abs(prev_inertia - inertia);
            if (change <= rel_tol * std::max(1e-30, prev_inertia)) break;
        }
        prev_inertia = inertia;
    }

    // final assignment and inertia for the returned centers
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = dist2(points[i].pos, centers[0]);
        for (int c = 1; c < k; ++c) {
            const double d = dist2(points[i].pos, centers[static_cast<std::size_t>(c)]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        assign[i] = best;
        inertia += w[i] * best_d;
    }

    res.assignment = std::move(assign);
    res.centers = std::move(centers);
    res.inertia = inertia;
    return res;
}

}  // namespace detail

/// Weighted k-means: Lloyd's algorithm with k-means++ initialization,
/// restarted n_init times under sub-seeds derived from the given seed;
/// the lowest-inertia run wins. Deterministic for a fixed seed; weights
/// enter both the centroid updates and the inertia.
inline KMeansResult kmeans(const std::vector<KMeansPoint>& points, int k, std::uint64_t seed,
                           int max_iter = 300, double rel_tol = 1e-9, int n_init = 10) {
    KMeansResult best;
    for (int r = 0; r < n_init; ++r) {
        KMeansResult run = detail::kmeans_single(points, k, seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(r),
                                                 max_iter, rel_tol);
        if (r == 0 || run.inertia < best.inertia) best = std::move(run);
    }
    return best;
}

/// Apportion k clusters over countries proportionally to bus count,
/// at least one each (largest remainder).
inline std::map<std::string, int> apportion_k(const std::map<std::string, std::size_t>& bus_counts,
                                              int k_total) {
    if (bus_counts.empty()) throw ContractError("apportion_k: no countries");
    if (k_total < static_cast<int>(bus_counts.size()))
        throw ConfigError("k must be at least the number of countries (" +
                          std::to_string(bus_counts.size()) + ")");
    std::size_t total = 0;
    for (const auto& [c, n] : bus_counts) total += n;

    std::map<std::string, int> out;
    std::vector<std::pair<double, std::string>> remainders;
    int assigned = 0;
    for (const auto& [c, n] : bus_counts) {
        const double exact = static_cast<double>(k_total) * static_cast<double>(n) /
                             static_cast<double>(total);
        int base = std::max(1, static_cast<int>(exact));
        base = std::min<int>(base, static_cast<int>(n));
        out[c] = base;
        assigned += base;
        remainders.push_back({exact - static_cast<double>(base), c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::size_t idx = 0;
    while (assigned < k_total && !remainders.empty()) {
        const std::string& c = remainders[idx % remainders.size()].second;
        if (out[c] < static_cast<int>(bus_counts.at(c))) {
            ++out[c];
            ++assigned;
        }
        ++idx;
        if (idx > 4 * remainders.size() * static_cast<std::size_t>(k_total)) break;  // all saturated
    }
    while (assigned > k_total) {  // floors may overshoot when k is tight
        for (auto it = remainders.rbegin(); it != remainders.rend() && assigned > k_total; ++it)
            if (out[it->second] > 1) {
                --out[it->second];
                --assigned;
            }
    }
    return out;
}

/// Cluster buses per country with weighted k-means; country borders are
/// never crossed. Cluster ids are dense in [0,k) and ordered by country.
inline ClusterMap kmeans_cluster(const Network& net, const std::map<std::string, double>& weights,
                                 int k, std::uint64_t seed) {
    std::map<std::string, std::vector<const Bus*>> by_country;
    for (const Bus& b : net.buses) by_country[b.country].push_back(&b);

    std::map<std::string, std::size_t> counts;
    for (const auto& [c, v] : by_country) counts[c] = v.size();
    const std::map<std::string, int> k_per = apportion_k(counts, k);

    ClusterMap cm;
    cm.seed = seed;
    int offset = 0;
    std::uint64_t sub = 0;
    for (const auto& [country, buses] : by_country) {
        LonLat mean{0, 0};
        for (const Bus* b : buses) {
            mean.lon += b->location.lon;
            mean.lat += b->location.lat;
        }
        mean.lon /= static_cast<double>(buses.size());
        mean.lat /= static_cast<double>(buses.size());
        const Projection proj(mean);

        std::vector<KMeansPoint> pts;
        pts.reserve(buses.size());
        for (const Bus* b : buses) {
            auto it = weights.find(b->id);
            pts.push_back({b->id, proj.to_xy(b->location), it != weights.end() ? it->second : 0.0});
        }
        const KMeansResult r = kmeans(pts, k_per.at(country), seed + 0x9e3779b9ULL * (++sub));
        for (std::size_t i = 0; i < pts.size(); ++i)
            cm.assignment[pts[i].id] = offset + r.assignment[i];
        for (double h : r.inertia_history) cm.inertia_history.push_back(h);
        cm.inertia += r.inertia;
        offset += k_per.at(country);
    }
    cm.k = offset;
    return cm;
}

inline std::string clustermap_to_csv(const ClusterMap& cm) {
    CsvWriter w({"bus_id", "cluster_id"});
    for (const auto& [bus, c] : cm.assignment) w.row({bus, std::to_string(c)});
    return w.str();
}

// -- aggregation -------------------------------------------------------

struct AggregateResult {
    Network network;
    std::vector<RegionCell> cells;
    // cluster bus id -> fuel -> MW
    std::map<std::string, std::map<std::string, double>> plant_capacity;
    // cluster bus id -> hourly series (summed over members)
    std::map<std::string, std::vector<double>> series;
    // cluster bus id -> summed clustering weight (e.g. population share)
    std::map<std::string, double> weight;
};

inline std::string cluster_bus_id(int cluster, const std::string& country) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "c%03d", cluster);
    return country.empty() ? std::string(buf) : std::string(buf) + "_" + country;
}

/// Reduce the network to one bus per cluster. Inter-cluster parallel
/// branches merge with parallel-impedance combination and summed
/// ratings; demand series, plant capacities and cell polygons are
/// carried over by summation/union, so cluster totals match member
/// totals exactly.
inline AggregateResult aggregate_network(
    const Network& net, const ClusterMap& cm, const std::vector<RegionCell>& cells,
    const std::map<std::string, std::map<std::string, double>>& plants_by_bus,
    const std::map<std::string, std::vector<double>>& series_by_bus,
    const std::map<std::string, double>& bus_weights = {}) {
    for (const Bus& b : net.buses)
        if (!cm.assignment.count(b.id))
            throw ContractError("aggregate_network: cluster map does not cover bus " + b.id);

    AggregateResult out;

    // cluster -> members
    std::map<int, std::vector<const Bus*>> members;
    for (const Bus& b : net.buses) members[cm.assignment.at(b.id)].push_back(&b);

    std::map<int, std::string> cluster_ids;
    for (const auto& [c, buses] : members) {
        const std::string country = buses.front()->country;
        for (const Bus* b : buses)
            if (b->country != country)
                throw ContractError("aggregate_network: cluster " + std::to_string(c) +
                                    " crosses a country border");
        cluster_ids[c] = cluster_bus_id(c, country);

        Bus nb;
        nb.id = cluster_ids[c];
        nb.country = country;
        nb.origin = BusOrigin::substation;
        double wsum = 0, lon = 0, lat = 0, kv = 0;
        for (const Bus* b : buses) {
            auto it = bus_weights.find(b->id);
            const double w = it != bus_weights.end() ? it->second : 0.0;
            wsum += w;
            lon += w * b->location.lon;
            lat += w * b->location.lat;
            kv = std::max(kv, b->voltage_kv);
        }
        if (wsum > 0) {
            nb.location = {lon / wsum, lat / wsum};
        } else {
            lon = lat = 0;
            for (const Bus* b : buses) {
                lon += b->location.lon;
                lat += b->location.lat;
            }
            nb.location = {lon / static_cast<double>(buses.size()),
                           lat / static_cast<double>(buses.size())};
        }
        nb.voltage_kv = kv;
        out.network.buses.push_back(std::move(nb));
        out.weight[cluster_ids[c]] = wsum;
    }

    // merge inter-cluster branches
    struct Merged {
        double inv_x = 0, inv_r = 0, s_nom = 0, len_weighted = 0;
        int circuits = 0;
        bool any_zero_r = false;
    };
    std::map<std::pair<int, int>, Merged> merged;
    for (const Branch& br : net.branches) {
        const int ca = cm.assignment.at(br.from_bus);
        const int cb = cm.assignment.at(br.to_bus);
        if (ca == cb) continue;
        const auto key = std::minmax(ca, cb);
        Merged& m = merged[{key.first, key.second}];
        if (br.x_ohm <= 0) throw ContractError("aggregate_network: branch " + br.id + " has x <= 0");
        m.inv_x += 1.0 / br.x_ohm;
        if (br.r_ohm > 0)
            m.inv_r += 1.0 / br.r_ohm;
        else
            m.any_zero_r = true;
        m.s_nom += br.s_nom_mva;
        m.len_weighted += br.s_nom_mva * br.length_km;
        m.circuits += br.circuits;
    }
    for (const auto& [key, m] : merged) {
        Branch br;
        br.from_bus = cluster_ids.at(key.first);
        br.to_bus = cluster_ids.at(key.second);
        br.id = br.from_bus + "__" + br.to_bus;
        br.x_ohm = 1.0 / m.inv_x;
        br.r_ohm = (m.any_zero_r || m.inv_r <= 0) ? 0.0 : 1.0 / m.inv_r;
        br.s_nom_mva = m.s_nom;
        br.length_km = m.s_nom > 0 ? m.len_weighted / m.s_nom : 0.0;
        br.circuits = std::max(1, m.circuits);
        out.network.branches.push_back(std::move(br));
    }
    out.network.metadata = net.metadata;
    out.network.metadata["aggregated_from"] = std::to_string(net.buses.size()) + " buses";
    out.network.sort_and_validate();

    // merge cells per cluster
    std::map<int, RegionCell> cell_by_cluster;
    for (const RegionCell& cell : cells) {
        auto it = cm.assignment.find(cell.bus_id);
        if (it == cm.assignment.end()) continue;
        RegionCell& mc = cell_by_cluster[it->second];
        mc.bus_id = cluster_ids.at(it->second);
        mc.country = cell.country;
        for (const auto& ring : cell.polygons) mc.polygons.push_back(ring);
        mc.area_km2 += cell.area_km2;
    }
    for (auto& [c, cell] : cell_by_cluster) out.cells.push_back(std::move(cell));

    // reattach plants and series
    for (const auto& [bus, fuels] : plants_by_bus) {
        auto it = cm.assignment.find(bus);
        if (it == cm.assignment.end()) continue;
        auto& target = out.plant_capacity[cluster_ids.at(it->second)];
        for (const auto& [fuel, mw] : fuels) target[fuel] += mw;
    }
    for (const auto& [bus, series] : series_by_bus) {
        auto it = cm.assignment.find(bus);
        if (it == cm.assignment.end()) continue;
        auto& target = out.series[cluster_ids.at(it->second)];
        if (target.empty()) target.assign(series.size(), 0.0);
        if (target.size() != series.size())
            throw ContractError("aggregate_network: series length mismatch at bus " + bus);
        for (std::size_t t = 0; t < series.size(); ++t) target[t] += series[t];
    }
    return out;
}

/// Cells as GeoJSON polygons with bus/cluster/area properties.
inline std::string cells_to_geojson(const std::vector<RegionCell>& cells,
                                    const std::map<std::string, int>* cluster_of_bus = nullptr) {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const RegionCell& cell : cells) {
        nlohmann::ordered_json geom;
        auto ring_to_json = [](const LonLatRing& ring) {
            nlohmann::ordered_json arr = nlohmann::ordered_json::array();
            for (const LonLat& p : ring) arr.push_back({p.lon, p.lat});
            if (!ring.empty()) arr.push_back({ring.front().lon, ring.front().lat});
            return arr;
        };
        if (cell.polygons.size() == 1) {
            geom["type"] = "Polygon";
            geom["coordinates"] = nlohmann::ordered_json::array({ring_to_json(cell.polygons[0])});
        } else {
            geom["type"] = "MultiPolygon";
            nlohmann::ordered_json polys = nlohmann::ordered_json::array();
            for (const auto& ring : cell.polygons)
                polys.push_back(nlohmann::ordered_json::array({ring_to_json(ring)}));
            geom["coordinates"] = std::move(polys);
        }
        nlohmann::ordered_json f;
        f["type"] = "Feature";
        f["geometry"] = std::move(geom);
        f["properties"] = {{"bus_id", cell.bus_id},
                           {"area_km2", cell.area_km2},
                           {"country", cell.country}};
        if (cluster_of_bus) {
            auto it = cluster_of_bus->find(cell.bus_id);
            if (it != cluster_of_bus->end()) f["properties"]["cluster_id"] = it->second;
        }
        features.push_back(std::move(f));
    }
    nlohmann::ordered_json doc;
    doc["type"] = "FeatureCollection";
    doc["features"] = std::move(features);
    return doc.dump();
}

}  // namespace gridweaver

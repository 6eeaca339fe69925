#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gridweaver/common.hpp"

namespace gridweaver {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }

/// WGS84 coordinate, degrees.
struct LonLat {
    double lon = 0;
    double lat = 0;

    friend bool operator==(const LonLat& a, const LonLat& b) = default;
};

/// Great-circle distance, haversine on a sphere of radius kEarthRadiusKm.
inline double haversine_km(const LonLat& a, const LonLat& b) {
    const double lat1 = deg2rad(a.lat), lat2 = deg2rad(b.lat);
    const double dlat = lat2 - lat1;
    const double dlon = deg2rad(b.lon - a.lon);
    const double s = std::sin(dlat / 2), t = std::sin(dlon / 2);
    const double h = s * s + std::cos(lat1) * std::cos(lat2) * t * t;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

/// Sum of great-circle segment lengths along a path.
inline double polyline_length_km(std::span<const LonLat> path) {
    if (path.size() < 2) throw ContractError("polyline_length_km: path needs at least 2 vertices");
    double total = 0;
    for (std::size_t i = 1; i < path.size(); ++i) total += haversine_km(path[i - 1], path[i]);
    return total;
}

/// Planar point in a local projection, km units.
struct XY {
    double x = 0;
    double y = 0;

    friend bool operator==(const XY& a, const XY& b) = default;
};

inline double dist2(const XY& a, const XY& b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Equirectangular projection about a reference point. Good enough at
/// country scale; the reference is recorded alongside any projected
/// geometry we persist.
class Projection {
public:
    Projection() = default;
    explicit Projection(const LonLat& origin)
        : origin_(origin), kx_(kEarthRadiusKm * kPi / 180.0 * std::cos(deg2rad(origin.lat))),
          ky_(kEarthRadiusKm * kPi / 180.0) {}

    XY to_xy(const LonLat& p) const { return {(p.lon - origin_.lon) * kx_, (p.lat - origin_.lat) * ky_}; }

    LonLat to_lonlat(const XY& p) const { return {origin_.lon + p.x / kx_, origin_.lat + p.y / ky_}; }

    const LonLat& origin() const { return origin_; }

private:
    LonLat origin_{};
    double kx_ = 1, ky_ = 1;
};

/// Simple polygon ring, implicitly closed (first vertex not repeated).
using Ring = std::vector<XY>;
using LonLatRing = std::vector<LonLat>;

/// Signed shoelace area; positive for counter-clockwise rings.
inline double ring_signed_area(const Ring& r) {
    double a = 0;
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        const XY& p = r[i];
        const XY& q = r[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return a / 2;
}

inline double ring_area(const Ring& r) { return std::abs(ring_signed_area(r)); }

inline XY ring_centroid(const Ring& r) {
    if (r.empty()) return {};
    double a = 0, cx = 0, cy = 0;
    const std::size_t n = r.size();
    for (std::size_t i = 0; i < n; ++i) {
        const XY& p = r[i];
        const XY& q = r[(i + 1) % n];
        const double w = p.x * q.y - q.x * p.y;
        a += w;
        cx += (p.x + q.x) * w;
        cy += (p.y + q.y) * w;
    }
    if (std::abs(a) < 1e-12) {  // degenerate: fall back to vertex mean
        for (const XY& p : r) { cx += p.x; cy += p.y; }
        return {cx / static_cast<double>(n), cy / static_cast<double>(n)};
    }
    return {cx / (3 * a), cy / (3 * a)};
}

/// Even-odd crossing test; boundary points may land on either side.
inline bool point_in_ring(const XY& p, const Ring& r) {
    bool inside = false;
    const std::size_t n = r.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const XY& a = r[i];
        const XY& b = r[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xint = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

/// Clip a ring against the half-plane {p : n·p <= c} (Sutherland-Hodgman).
/// Works on non-convex subjects; output may contain zero-area bridges,
/// which is fine for area accounting and containment tests.
inline Ring clip_halfplane(const Ring& subject, double nx, double ny, double c) {
    Ring out;
    const std::size_t n = subject.size();
    if (n == 0) return out;
    out.reserve(n + 2);
    for (std::size_t i = 0; i < n; ++i) {
        const XY& cur = subject[i];
        const XY& nxt = subject[(i + 1) % n];
        const double dc = nx * cur.x + ny * cur.y - c;
        const double dn = nx * nxt.x + ny * nxt.y - c;
        const bool in_cur = dc <= 0, in_nxt = dn <= 0;
        if (in_cur) out.push_back(cur);
        if (in_cur != in_nxt) {
            const double t = dc / (dc - dn);
            out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
        }
    }
    return out;
}

/// Clip a ring against a convex ring. Exact for convex clip regions.
inline Ring clip_convex(const Ring& subject, const Ring& convex_clip) {
    Ring out = subject;
    const std::size_t n = convex_clip.size();
    const double orient = ring_signed_area(convex_clip);
    for (std::size_t i = 0; i < n && !out.empty(); ++i) {
        const XY& a = convex_clip[i];
        const XY& b = convex_clip[(i + 1) % n];
        // inward normal depends on clip orientation
        double nx = b.y - a.y, ny = a.x - b.x;
        if (orient < 0) { nx = -nx; ny = -ny; }
        out = clip_halfplane(out, nx, ny, nx * a.x + ny * a.y);
    }
    return out;
}

inline XY path_nearest_point_on_segment(const XY& p, const XY& a, const XY& b) {
    const double vx = b.x - a.x, vy = b.y - a.y;
    const double len2 = vx * vx + vy * vy;
    if (len2 <= 0) return a;
    double t = ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2;
    t = std::max(0.0, std::min(1.0, t));
    return {a.x + t * vx, a.y + t * vy};
}

}  // namespace gridweaver

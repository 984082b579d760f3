#include "sapi/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace sapi {

void Aabb::expand(const Vec2& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
}

void Aabb::expand(const Aabb& o) {
    expand(o.lo);
    expand(o.hi);
}

bool Aabb::contains(const Vec2& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y;
}

bool Aabb::intersects(const Aabb& o) const {
    return lo.x <= o.hi.x && hi.x >= o.lo.x && lo.y <= o.hi.y && hi.y >= o.lo.y;
}

double polyline_length(const Polyline& line) {
    double len = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) len += distance(line[i - 1], line[i]);
    return len;
}

std::vector<double> cumulative_arc(const Polyline& line) {
    std::vector<double> arc(line.size(), 0.0);
    for (std::size_t i = 1; i < line.size(); ++i)
        arc[i] = arc[i - 1] + distance(line[i - 1], line[i]);
    return arc;
}

Vec2 point_at_arc(const Polyline& line, double s) {
    if (line.empty()) return {};
    if (s <= 0.0) return line.front();
    double acc = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        double seg = distance(line[i - 1], line[i]);
        if (acc + seg >= s) {
            double t = seg > 0.0 ? (s - acc) / seg : 0.0;
            return line[i - 1] + (line[i] - line[i - 1]) * t;
        }
        acc += seg;
    }
    return line.back();
}

Vec2 tangent_at_arc(const Polyline& line, double s) {
    if (line.size() < 2) return {1.0, 0.0};
    double acc = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        double seg = distance(line[i - 1], line[i]);
        if (acc + seg >= s || i + 1 == line.size())
            return (line[i] - line[i - 1]).normalized();
        acc += seg;
    }
    return (line.back() - line[line.size() - 2]).normalized();
}

Projection project_to_polyline(const Polyline& line, const Vec2& p) {
    Projection best;
    best.dist = 1e300;
    double acc = 0.0;
    for (std::size_t i = 1; i < line.size(); ++i) {
        Vec2 a = line[i - 1];
        Vec2 b = line[i];
        Vec2 ab = b - a;
        double seg = ab.norm();
        double t = seg > 0.0 ? std::clamp((p - a).dot(ab) / (seg * seg), 0.0, 1.0) : 0.0;
        Vec2 q = a + ab * t;
        double d = distance(p, q);
        if (d < best.dist) {
            best.dist = d;
            best.arc = acc + t * seg;
            best.point = q;
            best.tangent = ab.normalized();
        }
        acc += seg;
    }
    return best;
}

bool point_in_polygon(const Polygon& poly, const Vec2& p) {
    bool inside = false;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = poly[j];
        const Vec2& b = poly[i];
        if ((b.y > p.y) != (a.y > p.y)) {
            double x_cross = b.x + (p.y - b.y) / (a.y - b.y) * (a.x - b.x);
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

double polygon_area(const Polygon& poly) {
    double twice = 0.0;
    std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) twice += poly[j].cross(poly[i]);
    return std::abs(twice) * 0.5;
}

Aabb polygon_aabb(const Polygon& poly) {
    Aabb box;
    for (const Vec2& p : poly) box.expand(p);
    return box;
}

Polygon buffer_polyline(const Polyline& center, double width) {
    if (center.size() < 2) throw DegenerateGeometry("centerline needs at least 2 points");
    if (width <= 0.0) throw DegenerateGeometry("width must be positive");

    std::size_t n = center.size();
    std::vector<Vec2> tangents(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = i == 0 ? 0 : i - 1;
        std::size_t b = std::min(i + 1, n - 1);
        Vec2 t = (center[b] - center[a]);
        if (t.norm() == 0.0) throw DegenerateGeometry("duplicate consecutive centerline points");
        tangents[i] = t.normalized();
    }

    double half = width / 2.0;
    Polyline left(n), right(n);
    for (std::size_t i = 0; i < n; ++i) {
        Vec2 normal = tangents[i].perp();  // left of travel direction
        // Miter scaling so joint offsets keep the half-width against both
        // adjacent edges; capped to avoid spikes at sharp corners.
        double scale = 1.0;
        if (i > 0 && i + 1 < n) {
            Vec2 e0 = (center[i] - center[i - 1]).normalized();
            double cos_half = std::sqrt(std::max(0.0, (1.0 + e0.dot(tangents[i])) / 2.0));
            // tangents[i] already averages the two edges, so the angle between
            // e0 and it is half the turn angle.
            scale = std::min(1.0 / std::max(cos_half, 1e-6), 3.0);
        }
        left[i] = center[i] + normal * (half * scale);
        right[i] = center[i] - normal * (half * scale);
    }

    // A side folds over itself when consecutive offset points stop advancing
    // along the local travel direction.
    for (std::size_t i = 1; i < n; ++i) {
        Vec2 dir = center[i] - center[i - 1];
        if ((left[i] - left[i - 1]).dot(dir) <= 0.0 || (right[i] - right[i - 1]).dot(dir) <= 0.0)
            throw DegenerateGeometry("lane buffer self-intersects (radius below half width)");
    }

    Polygon poly;
    poly.reserve(2 * n);
    poly.insert(poly.end(), left.begin(), left.end());
    poly.insert(poly.end(), right.rbegin(), right.rend());
    return poly;
}

Polyline arc_polyline(const Vec2& center, double radius, double a0, double a1, int n_points) {
    Polyline line;
    n_points = std::max(n_points, 2);
    line.reserve(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        double a = a0 + (a1 - a0) * static_cast<double>(i) / (n_points - 1);
        line.push_back(center + Vec2{std::cos(a), std::sin(a)} * radius);
    }
    return line;
}

}  // namespace sapi

#pragma once

#include <vector>

#include "sapi/common.hpp"

namespace sapi {

using Polyline = std::vector<Vec2>;
using Polygon = std::vector<Vec2>;  // closed implicitly (last connects to first)

struct Aabb {
    Vec2 lo{1e300, 1e300};
    Vec2 hi{-1e300, -1e300};

    void expand(const Vec2& p);
    void expand(const Aabb& o);
    bool contains(const Vec2& p) const;
    bool intersects(const Aabb& o) const;
};

double polyline_length(const Polyline& line);

// Cumulative arc lengths, one per vertex (front() == 0).
std::vector<double> cumulative_arc(const Polyline& line);

// Point at arc offset s (clamped to [0, length]).
Vec2 point_at_arc(const Polyline& line, double s);

// Unit tangent of the sub-segment containing arc offset s.
Vec2 tangent_at_arc(const Polyline& line, double s);

struct Projection {
    double arc = 0.0;       // arc offset of the closest point
    double dist = 0.0;      // distance from query to the closest point
    Vec2 point;             // closest point on the polyline
    Vec2 tangent;           // unit tangent at the closest point
};

Projection project_to_polyline(const Polyline& line, const Vec2& p);

// Even-odd rule; points exactly on an edge resolve by the crossing convention
// (half-open edges), which keeps rasterization deterministic.
bool point_in_polygon(const Polygon& poly, const Vec2& p);

double polygon_area(const Polygon& poly);  // absolute shoelace area

Aabb polygon_aabb(const Polygon& poly);

// Offsets the centerline by +-width/2 and joins the two sides into a simple
// polygon. Throws DegenerateGeometry when the inner offset folds over itself
// (curvature radius below width/2).
Polygon buffer_polyline(const Polyline& center, double width);

// Sampled circular arc from angle a0 to a1 (radians, swept linearly) around
// center with the given radius; n_points >= 2.
Polyline arc_polyline(const Vec2& center, double radius, double a0, double a1, int n_points);

}  // namespace sapi

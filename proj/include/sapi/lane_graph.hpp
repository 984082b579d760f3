#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sapi/geometry.hpp"
#include "sapi/serialize.hpp"

namespace sapi {

using SegmentId = std::string;

struct LaneSegment {
    SegmentId id;
    Polyline centerline;  // meters, world frame
    double width = 0.0;
    std::vector<SegmentId> successors;
    std::optional<SegmentId> left_neighbor;
    std::optional<SegmentId> right_neighbor;
    bool left_change_legal = false;
    bool right_change_legal = false;
};

// Directed lane topology with geometry. Immutable after build(); all queries
// are const and safe to run concurrently.
class LaneGraph {
public:
    LaneGraph() = default;

    // Validates all segment invariants, resolves references, caches lane
    // polygons and builds the spatial index. Throws DegenerateGeometry /
    // ConfigError on invalid input.
    static LaneGraph build(std::vector<LaneSegment> segments);

    bool empty() const { return segments_.empty(); }
    std::size_t size() const { return segments_.size(); }
    bool contains(const SegmentId& id) const { return index_of_.count(id) != 0; }

    const LaneSegment& segment(const SegmentId& id) const;  // throws UnknownSegment
    const std::vector<LaneSegment>& segments() const { return segments_; }

    const Polygon& polygon(const SegmentId& id) const;
    double arc_length(const SegmentId& id) const;

    // Segments whose lane polygon bounding box contains the point.
    std::vector<const LaneSegment*> candidates_near(const Vec2& p) const;

    Json to_json() const;
    static LaneGraph from_json(const Json& j);

private:
    std::size_t index(const SegmentId& id) const;

    std::vector<LaneSegment> segments_;  // sorted by id
    std::vector<Polygon> polygons_;
    std::vector<Aabb> boxes_;
    std::vector<double> lengths_;
    std::map<SegmentId, std::size_t> index_of_;

    // Uniform grid over the graph bounding box.
    Aabb bounds_;
    double cell_size_ = 1.0;
    int grid_w_ = 0, grid_h_ = 0;
    std::vector<std::vector<std::uint32_t>> cells_;
};

struct LraResult {
    SegmentId c1;
    std::set<SegmentId> c2;
    std::set<SegmentId> c3;
    std::set<SegmentId> c4;
    std::set<SegmentId> all;
};

// Segment containing the position; among several containing segments the one
// whose local centerline direction best aligns with `heading` wins, exact
// ties break toward the lowest id. Throws NotOnRoad.
SegmentId locate_segment(const LaneGraph& graph, const Vec2& position, double heading);

// Successor traversal from `start` with distance budget d measured from
// start_offset along the start centerline. A segment is reachable iff some
// path arrives at its entry with remaining budget > 0. The start segment is
// never part of the result. Cycles are visited once with the best budget.
std::set<SegmentId> forward_search(const LaneGraph& graph, const SegmentId& start,
                                   double start_offset, double d);

LraResult compute_lra(const LaneGraph& graph, const Vec2& position, double heading, double d);

// Lane footprint polygon (centerline buffered by width/2).
Polygon segment_polygon(const LaneSegment& segment);

}  // namespace sapi

#include "sapi/lane_graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace sapi {

namespace {

void validate_segment(const LaneSegment& seg) {
    if (seg.id.empty()) throw ConfigError("lane segment with empty id");
    if (seg.centerline.size() < 2)
        throw DegenerateGeometry("segment '" + seg.id + "': centerline needs >= 2 points");
    for (std::size_t i = 1; i < seg.centerline.size(); ++i)
        if (seg.centerline[i] == seg.centerline[i - 1])
            throw DegenerateGeometry("segment '" + seg.id + "': duplicate consecutive points");
    if (!(seg.width > 0.0)) throw DegenerateGeometry("segment '" + seg.id + "': width must be > 0");
    if (!(polyline_length(seg.centerline) > 0.0))
        throw DegenerateGeometry("segment '" + seg.id + "': zero arc length");
}

}  // namespace

LaneGraph LaneGraph::build(std::vector<LaneSegment> segments) {
    LaneGraph g;
    std::sort(segments.begin(), segments.end(),
              [](const LaneSegment& a, const LaneSegment& b) { return a.id < b.id; });
    g.segments_ = std::move(segments);

    for (std::size_t i = 0; i < g.segments_.size(); ++i) {
        const LaneSegment& seg = g.segments_[i];
        validate_segment(seg);
        if (!g.index_of_.emplace(seg.id, i).second)
            throw ConfigError("duplicate segment id '" + seg.id + "'");
    }

    auto check_ref = [&](const LaneSegment& seg, const SegmentId& ref) {
        if (!g.index_of_.count(ref))
            throw ConfigError("segment '" + seg.id + "' references unknown segment '" + ref + "'");
    };
    for (const LaneSegment& seg : g.segments_) {
        for (const SegmentId& s : seg.successors) check_ref(seg, s);
        if (seg.left_neighbor) {
            check_ref(seg, *seg.left_neighbor);
            const LaneSegment& nb = g.segments_[g.index_of_.at(*seg.left_neighbor)];
            if (nb.right_neighbor && *nb.right_neighbor != seg.id)
                throw ConfigError("inconsistent neighbor links between '" + seg.id + "' and '" +
                                  nb.id + "'");
        }
        if (seg.right_neighbor) {
            check_ref(seg, *seg.right_neighbor);
            const LaneSegment& nb = g.segments_[g.index_of_.at(*seg.right_neighbor)];
            if (nb.left_neighbor && *nb.left_neighbor != seg.id)
                throw ConfigError("inconsistent neighbor links between '" + seg.id + "' and '" +
                                  nb.id + "'");
        }
    }

    g.polygons_.reserve(g.segments_.size());
    g.lengths_.reserve(g.segments_.size());
    for (const LaneSegment& seg : g.segments_) {
        g.polygons_.push_back(segment_polygon(seg));
        g.boxes_.push_back(polygon_aabb(g.polygons_.back()));
        g.lengths_.push_back(polyline_length(seg.centerline));
        g.bounds_.expand(g.boxes_.back());
    }

    if (!g.segments_.empty()) {
        double span_x = g.bounds_.hi.x - g.bounds_.lo.x;
        double span_y = g.bounds_.hi.y - g.bounds_.lo.y;
        g.cell_size_ = std::max(5.0, std::max(span_x, span_y) / 64.0);
        g.grid_w_ = std::max(1, static_cast<int>(std::ceil(span_x / g.cell_size_)));
        g.grid_h_ = std::max(1, static_cast<int>(std::ceil(span_y / g.cell_size_)));
        g.cells_.assign(static_cast<std::size_t>(g.grid_w_) * g.grid_h_, {});
        for (std::size_t i = 0; i < g.segments_.size(); ++i) {
            const Aabb& b = g.boxes_[i];
            int x0 = std::clamp(static_cast<int>((b.lo.x - g.bounds_.lo.x) / g.cell_size_), 0, g.grid_w_ - 1);
            int x1 = std::clamp(static_cast<int>((b.hi.x - g.bounds_.lo.x) / g.cell_size_), 0, g.grid_w_ - 1);
            int y0 = std::clamp(static_cast<int>((b.lo.y - g.bounds_.lo.y) / g.cell_size_), 0, g.grid_h_ - 1);
            int y1 = std::clamp(static_cast<int>((b.hi.y - g.bounds_.lo.y) / g.cell_size_), 0, g.grid_h_ - 1);
            for (int gy = y0; gy <= y1; ++gy)
                for (int gx = x0; gx <= x1; ++gx)
                    g.cells_[static_cast<std::size_t>(gy) * g.grid_w_ + gx].push_back(
                        static_cast<std::uint32_t>(i));
        }
    }
    return g;
}

std::size_t LaneGraph::index(const SegmentId& id) const {
    auto it = index_of_.find(id);
    if (it == index_of_.end()) throw UnknownSegment("unknown segment '" + id + "'");
    return it->second;
}

const LaneSegment& LaneGraph::segment(const SegmentId& id) const { return segments_[index(id)]; }

const Polygon& LaneGraph::polygon(const SegmentId& id) const { return polygons_[index(id)]; }

double LaneGraph::arc_length(const SegmentId& id) const { return lengths_[index(id)]; }

std::vector<const LaneSegment*> LaneGraph::candidates_near(const Vec2& p) const {
    std::vector<const LaneSegment*> out;
    if (segments_.empty() || !bounds_.contains(p)) return out;
    int gx = std::clamp(static_cast<int>((p.x - bounds_.lo.x) / cell_size_), 0, grid_w_ - 1);
    int gy = std::clamp(static_cast<int>((p.y - bounds_.lo.y) / cell_size_), 0, grid_h_ - 1);
    for (std::uint32_t i : cells_[static_cast<std::size_t>(gy) * grid_w_ + gx])
        if (boxes_[i].contains(p)) out.push_back(&segments_[i]);
    return out;
}

Json LaneGraph::to_json() const {
    Json segs = Json::array();
    for (const LaneSegment& seg : segments_) {
        Json points = Json::array();
        for (const Vec2& p : seg.centerline) points.push_back(Json::array({p.x, p.y}));
        Json js = {
            {"id", seg.id},
            {"centerline", points},
            {"width", seg.width},
            {"successors", seg.successors},
            {"left_neighbor", seg.left_neighbor ? Json(*seg.left_neighbor) : Json(nullptr)},
            {"right_neighbor", seg.right_neighbor ? Json(*seg.right_neighbor) : Json(nullptr)},
            {"left_change_legal", seg.left_change_legal},
            {"right_change_legal", seg.right_change_legal},
        };
        segs.push_back(std::move(js));
    }
    return Json{{"schema_version", 1}, {"segments", segs}};
}

LaneGraph LaneGraph::from_json(const Json& j) {
    require_schema_version(j, 1, "lane graph");
    reject_unknown_keys(j, {"schema_version", "segments"}, "lane graph");
    std::vector<LaneSegment> segs;
    for (const Json& js : j.at("segments")) {
        reject_unknown_keys(js,
                            {"id", "centerline", "width", "successors", "left_neighbor",
                             "right_neighbor", "left_change_legal", "right_change_legal"},
                            "lane segment");
        LaneSegment seg;
        seg.id = js.at("id").get<std::string>();
        for (const Json& p : js.at("centerline"))
            seg.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        seg.width = js.at("width").get<double>();
        seg.successors = js.at("successors").get<std::vector<std::string>>();
        if (!js.at("left_neighbor").is_null())
            seg.left_neighbor = js.at("left_neighbor").get<std::string>();
        if (!js.at("right_neighbor").is_null())
            seg.right_neighbor = js.at("right_neighbor").get<std::string>();
        seg.left_change_legal = js.at("left_change_legal").get<bool>();
        seg.right_change_legal = js.at("right_change_legal").get<bool>();
        segs.push_back(std::move(seg));
    }
    return build(std::move(segs));
}

SegmentId locate_segment(const LaneGraph& graph, const Vec2& position, double heading) {
    if (graph.empty()) throw NotOnRoad("empty lane graph");
    Vec2 h = heading_vec(heading);
    const LaneSegment* best = nullptr;
    double best_cos = -2.0;
    for (const LaneSegment* seg : graph.candidates_near(position)) {
        if (!point_in_polygon(graph.polygon(seg->id), position)) continue;
        Projection proj = project_to_polyline(seg->centerline, position);
        double c = proj.tangent.dot(h);
        if (c > best_cos || (c == best_cos && best && seg->id < best->id)) {
            best_cos = c;
            best = seg;
        }
    }
    if (!best) throw NotOnRoad("position is outside every lane polygon");
    return best->id;
}

std::set<SegmentId> forward_search(const LaneGraph& graph, const SegmentId& start,
                                   double start_offset, double d) {
    const LaneSegment& s0 = graph.segment(start);  // throws UnknownSegment
    std::set<SegmentId> result;
    if (d <= 0.0) return result;

    // Max-budget relaxation; a segment's entry budget can only improve through
    // shorter prefixes, so each id is expanded once at its best budget.
    std::map<SegmentId, double> best_entry;
    using Item = std::pair<double, SegmentId>;
    std::priority_queue<Item> queue;

    double initial = d - (graph.arc_length(start) - start_offset);
    for (const SegmentId& succ : s0.successors) {
        auto it = best_entry.find(succ);
        if (it == best_entry.end() || initial > it->second) {
            best_entry[succ] = initial;
            queue.push({initial, succ});
        }
    }

    while (!queue.empty()) {
        auto [budget, id] = queue.top();
        queue.pop();
        if (budget < best_entry.at(id)) continue;  // stale entry
        if (budget <= 0.0) continue;
        if (id != start) result.insert(id);
        double next = budget - graph.arc_length(id);
        if (next <= 0.0) continue;
        for (const SegmentId& succ : graph.segment(id).successors) {
            auto it = best_entry.find(succ);
            if (it == best_entry.end() || next > it->second) {
                best_entry[succ] = next;
                queue.push({next, succ});
            }
        }
    }
    return result;
}

LraResult compute_lra(const LaneGraph& graph, const Vec2& position, double heading, double d) {
    LraResult lra;
    lra.c1 = locate_segment(graph, position, heading);

    const LaneSegment& c1 = graph.segment(lra.c1);
    double offset = project_to_polyline(c1.centerline, position).arc;
    lra.c2 = forward_search(graph, lra.c1, offset, d);

    if (c1.left_change_legal && c1.left_neighbor) lra.c3.insert(*c1.left_neighbor);
    if (c1.right_change_legal && c1.right_neighbor) lra.c3.insert(*c1.right_neighbor);

    for (const SegmentId& nb : lra.c3) {
        double nb_offset = project_to_polyline(graph.segment(nb).centerline, position).arc;
        std::set<SegmentId> reach = forward_search(graph, nb, nb_offset, d);
        lra.c4.insert(reach.begin(), reach.end());
    }

    lra.all.insert(lra.c1);
    lra.all.insert(lra.c2.begin(), lra.c2.end());
    lra.all.insert(lra.c3.begin(), lra.c3.end());
    lra.all.insert(lra.c4.begin(), lra.c4.end());
    return lra;
}

Polygon segment_polygon(const LaneSegment& segment) {
    validate_segment(segment);
    return buffer_polyline(segment.centerline, segment.width);
}

}  // namespace sapi

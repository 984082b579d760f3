#include "sapi/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace sapi {

namespace {

constexpr double kLaneWidth = 3.5;     // meters
constexpr double kLegLength = 60.0;    // approach / exit leg length, meters
constexpr double kStopSetback = 2.0;   // stop line sits this far before the box
constexpr double kConflictHorizon = 3.0;   // seconds of look-ahead in the stop rule
constexpr double kLaneChangeDuration = 2.4;  // seconds for the lateral blend
constexpr double kLateralAccel = 3.0;  // m/s^2 comfort bound -> arc speed cap

double wrap_pi(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

}  // namespace

const char* to_string(IntersectionKind k) {
    return k == IntersectionKind::four_leg ? "four_leg" : "t_type";
}

IntersectionKind intersection_kind_from_string(const std::string& s) {
    if (s == "four_leg") return IntersectionKind::four_leg;
    if (s == "t_type") return IntersectionKind::t_type;
    throw ConfigError("unknown intersection kind '" + s + "'");
}

double BehaviorMix::weight(Behavior b) const {
    switch (b) {
        case Behavior::straight: return straight;
        case Behavior::turn_left: return turn_left;
        case Behavior::turn_right: return turn_right;
        case Behavior::lane_change: return lane_change;
        case Behavior::stop_for_traffic: return stop_for_traffic;
    }
    return 0.0;
}

double BehaviorMix::total() const {
    return straight + turn_left + turn_right + lane_change + stop_for_traffic;
}

void BehaviorMix::validate() const {
    for (double w : {straight, turn_left, turn_right, lane_change, stop_for_traffic}) {
        if (!(w >= 0.0)) throw ConfigError("behavior weights must be non-negative");
    }
    if (!(total() > 0.0)) throw ConfigError("behavior weights must not all be zero");
}

Json BehaviorMix::to_json() const {
    return Json{{"straight", straight},
                {"turn_left", turn_left},
                {"turn_right", turn_right},
                {"lane_change", lane_change},
                {"stop_for_traffic", stop_for_traffic}};
}

BehaviorMix BehaviorMix::from_json(const Json& j) {
    reject_unknown_keys(j, {"straight", "turn_left", "turn_right", "lane_change",
                            "stop_for_traffic"},
                        "behavior_mix");
    BehaviorMix mix;
    mix.straight = j.value("straight", 0.0);
    mix.turn_left = j.value("turn_left", 0.0);
    mix.turn_right = j.value("turn_right", 0.0);
    mix.lane_change = j.value("lane_change", 0.0);
    mix.stop_for_traffic = j.value("stop_for_traffic", 0.0);
    mix.validate();
    return mix;
}

void ScenarioSpec::validate() const {
    if (lanes_per_approach < 1) throw ConfigError("lanes_per_approach must be >= 1");
    if (agent_count < 0) throw ConfigError("agent_count must be >= 0");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    behavior_mix.validate();
}

Json ScenarioSpec::to_json() const {
    return Json{{"intersection_kind", to_string(intersection_kind)},
                {"lanes_per_approach", lanes_per_approach},
                {"agent_count", agent_count},
                {"behavior_mix", behavior_mix.to_json()},
                {"seed", seed},
                {"steps", steps}};
}

ScenarioSpec ScenarioSpec::from_json(const Json& j) {
    reject_unknown_keys(j, {"intersection_kind", "lanes_per_approach", "agent_count",
                            "behavior_mix", "seed", "steps"},
                        "scenario spec");
    ScenarioSpec spec;
    if (j.contains("intersection_kind"))
        spec.intersection_kind =
            intersection_kind_from_string(j.at("intersection_kind").get<std::string>());
    spec.lanes_per_approach = j.value("lanes_per_approach", spec.lanes_per_approach);
    spec.agent_count = j.value("agent_count", spec.agent_count);
    if (j.contains("behavior_mix"))
        spec.behavior_mix = BehaviorMix::from_json(j.at("behavior_mix"));
    spec.seed = j.value("seed", spec.seed);
    spec.steps = j.value("steps", spec.steps);
    spec.validate();
    return spec;
}

// ---------------------------------------------------------------------------
// Intersection construction
// ---------------------------------------------------------------------------

namespace {

struct Leg {
    std::string name;
    Vec2 u;  // unit vector pointing from the leg toward the junction center
};

std::vector<Leg> legs_for(IntersectionKind kind) {
    // Inbound travel directions: south leg traffic heads north, etc.
    std::vector<Leg> legs = {{"s", {0.0, 1.0}}, {"e", {-1.0, 0.0}}, {"w", {1.0, 0.0}}};
    if (kind == IntersectionKind::four_leg) legs.push_back({"n", {0.0, -1.0}});
    return legs;
}

const Leg* find_leg(const std::vector<Leg>& legs, const Vec2& u) {
    for (const Leg& leg : legs) {
        if (std::abs(leg.u.x - u.x) < 1e-9 && std::abs(leg.u.y - u.y) < 1e-9) return &leg;
    }
    return nullptr;
}

Polyline quarter_arc(const Vec2& center, double radius, double a0, double a1,
                     const Vec2& exact_start, const Vec2& exact_end) {
    int n = std::max(9, static_cast<int>(std::ceil(radius * M_PI / 2.0)) + 1);
    Polyline arc = arc_polyline(center, radius, a0, a1, n);
    arc.front() = exact_start;  // snap seams so successive segments join exactly
    arc.back() = exact_end;
    return arc;
}

}  // namespace

LaneGraph build_intersection(IntersectionKind kind, int lanes_per_approach, std::uint64_t seed) {
    (void)seed;  // layout is fixed per (kind, lanes); seed kept for interface stability
    if (lanes_per_approach < 1) throw ConfigError("lanes_per_approach must be >= 1");
    const int k = lanes_per_approach;
    const double w = kLaneWidth;
    // Box grows with lane count so the tightest (rightmost) turn keeps a
    // drivable radius of 8.25 m regardless of k.
    const double b = 6.5 + w * static_cast<double>(k);
    const double far = b + kLegLength;
    const std::vector<Leg> legs = legs_for(kind);

    auto offset = [&](int i) { return w / 2.0 + w * static_cast<double>(i); };
    auto lane_id = [](const std::string& leg, const char* role, int i) {
        return leg + "_" + role + "_" + std::to_string(i);
    };

    std::vector<LaneSegment> segs;
    for (const Leg& leg : legs) {
        const Vec2 u = leg.u;
        const Vec2 r{u.y, -u.x};  // driver's right when heading along u
        for (int i = 0; i < k; ++i) {
            const double oi = offset(i);
            LaneSegment in;
            in.id = lane_id(leg.name, "in", i);
            in.centerline = {u * -far + r * oi, u * -b + r * oi};
            in.width = w;
            LaneSegment out;
            out.id = lane_id(leg.name, "out", i);
            out.centerline = {u * -b - r * oi, u * -far - r * oi};
            out.width = w;
            if (i > 0) {
                in.left_neighbor = lane_id(leg.name, "in", i - 1);
                in.left_change_legal = true;
                out.left_neighbor = lane_id(leg.name, "out", i - 1);
                out.left_change_legal = true;
            }
            if (i + 1 < k) {
                in.right_neighbor = lane_id(leg.name, "in", i + 1);
                in.right_change_legal = true;
                out.right_neighbor = lane_id(leg.name, "out", i + 1);
                out.right_change_legal = true;
            }

            const Vec2 entry = u * -b + r * oi;
            if (const Leg* opposite = find_leg(legs, u * -1.0)) {
                LaneSegment straight;
                straight.id = lane_id(leg.name, "straight", i);
                straight.centerline = {entry, u * b + r * oi};
                straight.width = w;
                straight.successors = {lane_id(opposite->name, "out", i)};
                in.successors.push_back(straight.id);
                segs.push_back(std::move(straight));
            }
            if (i == 0) {
                if (const Leg* exit = find_leg(legs, r)) {  // left turn ends heading -r
                    const double radius = b + oi;
                    const Vec2 center = entry - r * radius;
                    const Vec2 end = r * -b + u * oi;
                    const double a0 = std::atan2(r.y, r.x);
                    LaneSegment left;
                    left.id = lane_id(leg.name, "left", i);
                    left.centerline = quarter_arc(center, radius, a0, a0 + M_PI / 2.0, entry, end);
                    left.width = w;
                    left.successors = {lane_id(exit->name, "out", i)};
                    in.successors.push_back(left.id);
                    segs.push_back(std::move(left));
                }
            }
            if (i == k - 1) {
                if (const Leg* exit = find_leg(legs, r * -1.0)) {  // right turn ends heading r
                    const double radius = b - oi;
                    const Vec2 center = entry + r * radius;
                    const Vec2 end = r * b - u * oi;
                    const double a0 = std::atan2(-r.y, -r.x);
                    LaneSegment right;
                    right.id = lane_id(leg.name, "right", i);
                    right.centerline = quarter_arc(center, radius, a0, a0 - M_PI / 2.0, entry, end);
                    right.width = w;
                    right.successors = {lane_id(exit->name, "out", i)};
                    in.successors.push_back(right.id);
                    segs.push_back(std::move(right));
                }
            }
            segs.push_back(std::move(in));
            segs.push_back(std::move(out));
        }
    }
    return LaneGraph::build(std::move(segs));
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

// A route is a chain of successor-linked segments addressed by one arc length.
struct RoutePath {
    const LaneGraph* graph = nullptr;
    std::vector<SegmentId> ids;
    std::vector<double> entry;  // cumulative arc at each segment start
    double total = 0.0;

    void init(const LaneGraph& g, std::vector<SegmentId> route_ids) {
        graph = &g;
        ids = std::move(route_ids);
        entry.clear();
        total = 0.0;
        for (const SegmentId& id : ids) {
            entry.push_back(total);
            total += g.arc_length(id);
        }
    }

    std::size_t segment_index(double s) const {
        std::size_t i = ids.size() - 1;
        while (i > 0 && s < entry[i]) --i;
        return i;
    }

    Vec2 position(double s) const {
        std::size_t i = segment_index(s);
        return point_at_arc(graph->segment(ids[i]).centerline, s - entry[i]);
    }

    Vec2 tangent(double s) const {
        std::size_t i = segment_index(s);
        return tangent_at_arc(graph->segment(ids[i]).centerline, s - entry[i]);
    }
};

struct CapInterval {
    double entry = 0.0, exit = 0.0, vcap = 0.0;
};

// Speed caps from path curvature: v = sqrt(a_lat * R) per curved segment.
std::vector<CapInterval> curvature_caps(const RoutePath& path) {
    std::vector<CapInterval> caps;
    for (std::size_t i = 0; i < path.ids.size(); ++i) {
        const Polyline& line = path.graph->segment(path.ids[i]).centerline;
        double kappa_max = 0.0;
        for (std::size_t p = 2; p < line.size(); ++p) {
            Vec2 d0 = line[p - 1] - line[p - 2];
            Vec2 d1 = line[p] - line[p - 1];
            double step = 0.5 * (d0.norm() + d1.norm());
            if (step < 1e-9) continue;
            double turn = std::abs(wrap_pi(std::atan2(d1.y, d1.x) - std::atan2(d0.y, d0.x)));
            kappa_max = std::max(kappa_max, turn / step);
        }
        if (kappa_max < 1e-4) continue;  // effectively straight
        double radius = 1.0 / kappa_max;
        caps.push_back({path.entry[i], path.entry[i] + path.graph->arc_length(path.ids[i]),
                        std::sqrt(kLateralAccel * radius)});
    }
    return caps;
}

struct Plan {
    std::string agent_id;
    Behavior label = Behavior::straight;
    std::string leg;  // approach leg key, for the crossing test
    RoutePath path;
    RoutePath path_b;     // lane-change target route (empty ids if unused)
    bool has_blend = false;
    double change_start = 0.0;  // arc where the lateral blend begins
    double cruise = 8.0;
    double spawn_arc = 0.25;
    double vehicle_length = 4.5;
    double vehicle_width = 2.0;
    bool obeys_stop = false;
    double stop_line = 0.0;
    double stop_eta = 0.0;  // unbraked seconds from spawn to the stop line
    double box_entry = 0.0, box_exit = 0.0;
    bool crosses_box = false;
    bool retimed = false;
    std::vector<CapInterval> caps;
};

struct RouteTemplate {
    std::vector<SegmentId> ids;
    Behavior kind = Behavior::straight;
    std::string leg;
    double in_len = 0.0;
};

std::string leg_key(const SegmentId& id) {
    auto pos = id.find('_');
    return pos == std::string::npos ? id : id.substr(0, pos);
}

// Entry segments are those never listed as a successor; routes run from an
// entry to a terminal segment and are classified by net tangent rotation.
std::vector<RouteTemplate> enumerate_routes(const LaneGraph& graph) {
    std::set<SegmentId> is_successor;
    for (const LaneSegment& seg : graph.segments())
        for (const SegmentId& succ : seg.successors) is_successor.insert(succ);

    std::vector<RouteTemplate> routes;
    std::vector<SegmentId> chain;
    auto dfs = [&](auto&& self, const SegmentId& id) -> void {
        chain.push_back(id);
        const LaneSegment& seg = graph.segment(id);
        if (seg.successors.empty()) {
            if (chain.size() >= 2) {
                RouteTemplate route;
                route.ids = chain;
                route.leg = leg_key(chain.front());
                route.in_len = graph.arc_length(chain.front());
                const Polyline& first = graph.segment(chain.front()).centerline;
                const Polyline& last = graph.segment(chain.back()).centerline;
                Vec2 t0 = tangent_at_arc(first, 0.0);
                Vec2 t1 = tangent_at_arc(last, polyline_length(last));
                double rot = wrap_pi(std::atan2(t1.y, t1.x) - std::atan2(t0.y, t0.x));
                route.kind = std::abs(rot) < 0.3
                                 ? Behavior::straight
                                 : (rot > 0.0 ? Behavior::turn_left : Behavior::turn_right);
                routes.push_back(std::move(route));
            }
        } else {
            for (const SegmentId& succ : seg.successors) self(self, succ);
        }
        chain.pop_back();
    };
    for (const LaneSegment& seg : graph.segments())
        if (!is_successor.count(seg.id)) dfs(dfs, seg.id);
    return routes;
}

template <typename Rng>
Behavior sample_behavior(Rng& rng, const BehaviorMix& mix) {
    const Behavior order[] = {Behavior::straight, Behavior::turn_left, Behavior::turn_right,
                              Behavior::lane_change, Behavior::stop_for_traffic};
    double x = uniform_unit(rng) * mix.total();
    for (Behavior b : order) {
        x -= mix.weight(b);
        if (x < 0.0) return b;
    }
    return Behavior::straight;
}

double smoothstep(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// Junction region used by the stop rule: bounding box of all mid-route
// (connector) lane polygons, slightly expanded.
Aabb conflict_region(const LaneGraph& graph) {
    std::set<SegmentId> is_successor;
    for (const LaneSegment& seg : graph.segments())
        for (const SegmentId& succ : seg.successors) is_successor.insert(succ);
    Aabb box;
    for (const LaneSegment& seg : graph.segments()) {
        if (!seg.successors.empty() && is_successor.count(seg.id))
            box.expand(polygon_aabb(graph.polygon(seg.id)));
    }
    box.lo = box.lo - Vec2{1.0, 1.0};
    box.hi = box.hi + Vec2{1.0, 1.0};
    return box;
}

void compute_box_crossing(Plan& plan, const Aabb& box) {
    double first = -1.0, last = -1.0;
    for (double s = 0.0; s <= plan.path.total; s += 0.25) {
        if (box.contains(plan.path.position(s))) {
            if (first < 0.0) first = s;
            last = s;
        }
    }
    plan.crosses_box = first >= 0.0;
    if (plan.crosses_box) {
        plan.box_entry = std::max(0.0, first - plan.vehicle_length / 2.0);
        plan.box_exit = std::min(plan.path.total, last + plan.vehicle_length / 2.0);
    }
}

double min_cap_speed(const Plan& plan) {
    double v = 1e9;
    for (const CapInterval& cap : plan.caps) v = std::min(v, cap.vcap);
    return v;
}

// Conservative time for a turning agent to clear its connector: cruise, brake
// to the arc cap, traverse the arc.
double turn_completion_estimate(double approach, double cruise, double vcap, double arc_len) {
    vcap = std::min(vcap, cruise);
    double d_brake = std::max(0.0, (cruise * cruise - vcap * vcap) / (2.0 * kMaxAccel));
    if (approach <= d_brake) return approach / std::max(vcap, 1.0) + arc_len / std::max(vcap, 1.0);
    return (approach - d_brake) / cruise + (cruise - vcap) / kMaxAccel +
           arc_len / std::max(vcap, 1.0);
}

double allowed_speed(const Plan& plan, double s, bool conflict) {
    double v = plan.cruise;
    for (const CapInterval& cap : plan.caps) {
        if (s >= cap.exit) continue;
        if (s >= cap.entry)
            v = std::min(v, cap.vcap);
        else
            v = std::min(v, std::sqrt(cap.vcap * cap.vcap +
                                      2.0 * kMaxAccel * (cap.entry - s)));
    }
    double remain = std::max(0.0, plan.path.total - 0.5 - s);
    v = std::min(v, std::sqrt(2.0 * kMaxAccel * remain));
    if (conflict && s <= plan.stop_line + 0.5) {
        double gap = std::max(0.0, plan.stop_line - s);
        v = std::min(v, std::sqrt(2.0 * kMaxAccel * gap));
    }
    return v;
}

}  // namespace

std::vector<AgentTrack> simulate(const LaneGraph& graph, const ScenarioSpec& spec) {
    spec.validate();
    if (spec.agent_count == 0) return {};
    if (graph.empty()) throw ConfigError("cannot simulate on an empty lane graph");

    const std::vector<RouteTemplate> routes = enumerate_routes(graph);
    if (routes.empty()) throw ConfigError("lane graph has no drivable routes");

    std::vector<const RouteTemplate*> straights, lefts, rights;
    for (const RouteTemplate& route : routes) {
        if (route.kind == Behavior::straight) straights.push_back(&route);
        if (route.kind == Behavior::turn_left) lefts.push_back(&route);
        if (route.kind == Behavior::turn_right) rights.push_back(&route);
    }
    // Lane-change pairs: straight routes whose entry lanes are legal neighbors.
    struct ChangePair {
        const RouteTemplate* from;
        const RouteTemplate* to;
    };
    std::vector<ChangePair> change_pairs;
    for (const RouteTemplate* a : straights) {
        const LaneSegment& entry = graph.segment(a->ids.front());
        for (const auto& [neighbor, legal] :
             {std::pair{entry.left_neighbor, entry.left_change_legal},
              std::pair{entry.right_neighbor, entry.right_change_legal}}) {
            if (!neighbor || !legal) continue;
            for (const RouteTemplate* bq : straights)
                if (bq->ids.front() == *neighbor) change_pairs.push_back({a, bq});
        }
    }

    std::mt19937_64 rng(spec.seed);
    const double horizon = static_cast<double>(spec.steps) * kTickSeconds;
    const Aabb box = conflict_region(graph);

    std::vector<Plan> plans;
    plans.reserve(static_cast<std::size_t>(spec.agent_count));
    for (int a = 0; a < spec.agent_count; ++a) {
        Behavior wanted = sample_behavior(rng, spec.behavior_mix);
        if (wanted == Behavior::lane_change && change_pairs.empty()) wanted = Behavior::straight;
        if (wanted == Behavior::turn_left && lefts.empty()) wanted = Behavior::straight;
        if (wanted == Behavior::turn_right && rights.empty()) wanted = Behavior::straight;
        if (wanted == Behavior::stop_for_traffic && straights.empty())
            wanted = Behavior::straight;
        if (wanted == Behavior::straight && straights.empty()) {
            const RouteTemplate* any = routes.data() + uniform_index(rng, routes.size());
            wanted = any->kind;  // degenerate graph without straights: take what exists
        }

        Plan plan;
        plan.agent_id = "a" + std::to_string(a);
        plan.label = wanted;
        plan.cruise = uniform_in(rng, 5.0, 15.0);
        plan.vehicle_length = uniform_in(rng, 4.0, 5.0);
        plan.vehicle_width = uniform_in(rng, 1.8, 2.1);

        const RouteTemplate* chosen = nullptr;
        switch (wanted) {
            case Behavior::straight:
            case Behavior::stop_for_traffic:
                chosen = straights[uniform_index(rng, straights.size())];
                break;
            case Behavior::turn_left:
                chosen = lefts[uniform_index(rng, lefts.size())];
                break;
            case Behavior::turn_right:
                chosen = rights[uniform_index(rng, rights.size())];
                break;
            case Behavior::lane_change: {
                const ChangePair& pair = change_pairs[uniform_index(rng, change_pairs.size())];
                chosen = pair.from;
                plan.path_b.init(graph, pair.to->ids);
                plan.has_blend = true;
                break;
            }
        }
        plan.path.init(graph, chosen->ids);
        plan.leg = chosen->leg;
        plan.caps = curvature_caps(plan.path);

        const double in_len = chosen->in_len;
        switch (wanted) {
            case Behavior::straight:
                plan.spawn_arc =
                    uniform_in(rng, 0.25, std::max(0.25, std::min(40.0, in_len * 0.6)));
                break;
            case Behavior::turn_left:
            case Behavior::turn_right: {
                double vcap = min_cap_speed(plan);
                double arc_len = plan.path.total - in_len -
                                 graph.arc_length(chosen->ids.back());
                // Largest approach distance that still clears the turn in time.
                double lo = 5.0, hi = in_len - 2.0;
                while (hi - lo > 0.5) {
                    double mid = 0.5 * (lo + hi);
                    if (turn_completion_estimate(mid, plan.cruise, vcap, arc_len) + 1.2 <
                        horizon)
                        lo = mid;
                    else
                        hi = mid;
                }
                double d_max = std::clamp(lo, 5.0, in_len - 2.0);
                double dist = uniform_in(rng, std::min(5.0, d_max), d_max);
                plan.spawn_arc = std::max(0.25, in_len - dist);
                break;
            }
            case Behavior::lane_change: {
                plan.spawn_arc =
                    uniform_in(rng, 0.25, std::max(0.25, std::min(15.0, in_len * 0.25)));
                plan.change_start = plan.spawn_arc + uniform_in(rng, 4.0, 10.0);
                // Blend must finish before the approach lane ends.
                double budget = (in_len - 1.0 - plan.change_start) / kLaneChangeDuration;
                plan.cruise = std::min(plan.cruise, std::max(3.0, budget));
                break;
            }
            case Behavior::stop_for_traffic: {
                plan.cruise = uniform_in(rng, 5.0, 9.0);
                plan.obeys_stop = true;
                plan.stop_line = in_len - kStopSetback;
                double eta = std::min(uniform_in(rng, 4.5, 5.5), 0.5 * horizon);
                plan.spawn_arc = std::max(0.25, plan.stop_line - plan.cruise * eta);
                plan.stop_eta = (plan.stop_line - plan.spawn_arc) / plan.cruise;
                break;
            }
        }
        compute_box_crossing(plan, box);
        plans.push_back(std::move(plan));
    }

    // Every stop agent needs a crossing agent timed to trigger its stop rule.
    auto entry_time = [](const Plan& p) {
        return (p.box_entry - p.spawn_arc) / std::max(p.cruise, 0.5);
    };
    for (std::size_t i = 0; i < plans.size(); ++i) {
        if (!plans[i].obeys_stop) continue;
        Plan& stopper = plans[i];
        bool satisfied = false;
        for (std::size_t j = 0; j < plans.size() && !satisfied; ++j) {
            if (j == i || plans[j].obeys_stop) continue;
            if (plans[j].leg == stopper.leg || !plans[j].crosses_box) continue;
            double t = entry_time(plans[j]);
            satisfied = t >= stopper.stop_eta - 2.5 && t <= stopper.stop_eta + 0.5;
        }
        if (satisfied) continue;

        auto retime = [&](Plan& partner) {
            double target = std::max(1.0, stopper.stop_eta - 1.2);
            partner.spawn_arc = partner.box_entry - partner.cruise * target;
            if (partner.spawn_arc < 0.25) {
                partner.cruise = std::clamp((partner.box_entry - 0.25) / target, 3.0, 15.0);
                partner.spawn_arc = std::max(0.25, partner.box_entry - partner.cruise * target);
            }
            partner.retimed = true;
        };

        Plan* candidate = nullptr;
        for (Plan& other : plans) {
            if (&other == &stopper || other.obeys_stop || other.retimed) continue;
            if (other.leg == stopper.leg || !other.crosses_box) continue;
            if (other.label == Behavior::straight) {
                candidate = &other;
                break;
            }
            if (!candidate) candidate = &other;  // fall back to repurposing a turner
        }
        if (candidate) {
            if (candidate->label != Behavior::straight) {
                // Rebuild the partner as a straight crosser on its own leg.
                const RouteTemplate* straight_route = nullptr;
                for (const RouteTemplate* s : straights)
                    if (s->leg != stopper.leg) straight_route = s;
                if (straight_route) {
                    candidate->label = Behavior::straight;
                    candidate->has_blend = false;
                    candidate->path.init(graph, straight_route->ids);
                    candidate->leg = straight_route->leg;
                    candidate->caps = curvature_caps(candidate->path);
                    compute_box_crossing(*candidate, box);
                }
            }
            if (candidate->label == Behavior::straight && candidate->crosses_box &&
                candidate->leg != stopper.leg) {
                retime(*candidate);
                satisfied = true;
            }
        }
        if (!satisfied) {  // nobody available to cross: the agent just drives on
            stopper.label = Behavior::straight;
            stopper.obeys_stop = false;
        }
    }

    // Integrate all agents on the shared clock.
    struct Motion {
        double s = 0.0;
        double v = 0.0;
        double blend_t = -1.0;  // <0: not started
        double heading = 0.0;
        Vec2 position;
    };
    std::vector<Motion> motion(plans.size());
    std::vector<AgentTrack> tracks(plans.size());
    for (std::size_t i = 0; i < plans.size(); ++i) {
        const Plan& plan = plans[i];
        Motion& m = motion[i];
        m.s = plan.spawn_arc;
        m.v = std::min(plan.cruise, allowed_speed(plan, m.s, false));
        m.position = plan.path.position(m.s);
        Vec2 tangent = plan.path.tangent(m.s);
        m.heading = std::atan2(tangent.y, tangent.x);
        tracks[i].agent_id = plan.agent_id;
        tracks[i].behavior_label = plan.label;
        tracks[i].t0 = 0.0;
        tracks[i].states.reserve(static_cast<std::size_t>(spec.steps));
    }

    const double dt = kTickSeconds;
    for (int step = 0; step < spec.steps; ++step) {
        // Stop-rule conflicts are evaluated against everyone's previous state.
        std::vector<bool> conflict(plans.size(), false);
        for (std::size_t i = 0; i < plans.size(); ++i) {
            if (!plans[i].obeys_stop) continue;
            for (std::size_t j = 0; j < plans.size(); ++j) {
                if (j == i || !plans[j].crosses_box) continue;
                if (plans[j].leg == plans[i].leg) continue;
                if (motion[j].s >= plans[j].box_exit) continue;
                double eta = (plans[j].box_entry - motion[j].s) / std::max(motion[j].v, 0.5);
                if (eta <= kConflictHorizon) {
                    conflict[i] = true;
                    break;
                }
            }
        }

        for (std::size_t i = 0; i < plans.size(); ++i) {
            const Plan& plan = plans[i];
            Motion& m = motion[i];
            if (step > 0) {
                double lookahead = allowed_speed(plan, m.s + m.v * dt, conflict[i]);
                double v_next = std::clamp(lookahead, m.v - kMaxAccel * dt,
                                           m.v + kMaxAccel * dt);
                m.v = std::max(0.0, v_next);
                m.s = std::min(m.s + m.v * dt, plan.path.total - 0.5);
                if (plan.has_blend && m.s >= plan.change_start && m.blend_t < 0.0)
                    m.blend_t = 0.0;
                if (m.blend_t >= 0.0 && m.blend_t < kLaneChangeDuration && m.v > 0.5)
                    m.blend_t += dt;

                Vec2 p = plan.path.position(m.s);
                if (plan.has_blend && m.blend_t >= 0.0) {
                    double lambda = smoothstep(m.blend_t / kLaneChangeDuration);
                    p = p * (1.0 - lambda) + plan.path_b.position(m.s) * lambda;
                }
                Vec2 dp = p - m.position;
                if (dp.norm() > 1e-6) m.heading = std::atan2(dp.y, dp.x);
                m.position = p;
            }
            tracks[i].states.push_back(AgentState::make(m.position, m.heading, m.v,
                                                        plan.vehicle_length,
                                                        plan.vehicle_width));
        }
    }

    for (const AgentTrack& track : tracks) validate_track(track);
    return tracks;
}

Scenario generate_scenario(const ScenarioSpec& spec, const std::string& scenario_id) {
    spec.validate();
    Scenario scenario;
    scenario.scenario_id = scenario_id;
    scenario.spec = spec;
    scenario.graph = build_intersection(spec.intersection_kind, spec.lanes_per_approach,
                                        spec.seed);
    scenario.tracks = simulate(scenario.graph, spec);
    return scenario;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

Json track_to_json(const AgentTrack& track) {
    Json states = Json::array();
    for (std::size_t k = 0; k < track.states.size(); ++k) {
        const AgentState& s = track.states[k];
        states.push_back(Json::array({track.time_at(k), s.position.x, s.position.y, s.heading,
                                      s.speed, s.length, s.width}));
    }
    return Json{{"agent_id", track.agent_id},
                {"behavior", to_string(track.behavior_label)},
                {"states", std::move(states)}};
}

AgentTrack track_from_json(const Json& j) {
    reject_unknown_keys(j, {"agent_id", "behavior", "states"}, "track");
    AgentTrack track;
    track.agent_id = j.at("agent_id").get<std::string>();
    track.behavior_label = behavior_from_string(j.at("behavior").get<std::string>());
    const Json& states = j.at("states");
    for (std::size_t k = 0; k < states.size(); ++k) {
        const Json& row = states[k];
        if (!row.is_array() || row.size() != 7)
            throw ConfigError("track state rows must be [t, x, y, heading, speed, length, width]");
        double t = row[0].get<double>();
        if (k == 0) {
            track.t0 = t;
        } else if (std::abs(t - track.time_at(k)) > 1e-9) {
            throw ConfigError("track '" + track.agent_id + "' states are not on the 0.4 s grid");
        }
        track.states.push_back(AgentState::make({row[1].get<double>(), row[2].get<double>()},
                                                row[3].get<double>(), row[4].get<double>(),
                                                row[5].get<double>(), row[6].get<double>()));
    }
    validate_track(track);
    return track;
}

}  // namespace

Json Scenario::to_json() const {
    Json tracks_json = Json::array();
    for (const AgentTrack& track : tracks) tracks_json.push_back(track_to_json(track));
    return Json{{"schema_version", 1},
                {"scenario_id", scenario_id},
                {"spec", spec.to_json()},
                {"lane_graph", graph.to_json()},
                {"tracks", std::move(tracks_json)}};
}

Scenario Scenario::from_json(const Json& j) {
    reject_unknown_keys(j, {"schema_version", "scenario_id", "spec", "lane_graph", "tracks"},
                        "scenario");
    require_schema_version(j, 1, "scenario");
    Scenario scenario;
    scenario.scenario_id = j.at("scenario_id").get<std::string>();
    scenario.spec = ScenarioSpec::from_json(j.at("spec"));
    scenario.graph = LaneGraph::from_json(j.at("lane_graph"));
    for (const Json& t : j.at("tracks")) scenario.tracks.push_back(track_from_json(t));
    return scenario;
}

void write_scenarios_jsonl(const std::filesystem::path& path,
                           const std::vector<Scenario>& scenarios) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    for (const Scenario& scenario : scenarios) {
        out << scenario.to_json().dump() << '\n';
        if (!out) throw IoError("failed writing '" + path.string() + "'");
    }
}

std::vector<Scenario> read_scenarios_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::vector<Scenario> scenarios;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::parse_error& e) {
            throw IoError("invalid JSON on line " + std::to_string(line_no) + " of '" +
                          path.string() + "': " + e.what());
        }
        scenarios.push_back(Scenario::from_json(j));
    }
    return scenarios;
}

}  // namespace sapi

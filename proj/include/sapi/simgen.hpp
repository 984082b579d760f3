#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sapi/agents.hpp"
#include "sapi/lane_graph.hpp"
#include "sapi/serialize.hpp"

namespace sapi {

enum class IntersectionKind { four_leg, t_type };

const char* to_string(IntersectionKind k);
IntersectionKind intersection_kind_from_string(const std::string& s);

// Sampling weights over the five behavior classes. Weights are relative; they
// must be non-negative with a positive sum.
struct BehaviorMix {
    double straight = 1.0;
    double turn_left = 1.0;
    double turn_right = 1.0;
    double lane_change = 1.0;
    double stop_for_traffic = 1.0;

    double weight(Behavior b) const;
    double total() const;
    void validate() const;

    Json to_json() const;
    static BehaviorMix from_json(const Json& j);
};

struct ScenarioSpec {
    IntersectionKind intersection_kind = IntersectionKind::four_leg;
    int lanes_per_approach = 1;
    int agent_count = 1;
    BehaviorMix behavior_mix;
    std::uint64_t seed = 0;
    int steps = 40;  // states per track; all tracks share one clock from t=0

    void validate() const;

    Json to_json() const;
    static ScenarioSpec from_json(const Json& j);
};

// One generated scene: the lane graph plus all simulated tracks.
struct Scenario {
    std::string scenario_id;
    ScenarioSpec spec;
    LaneGraph graph;
    std::vector<AgentTrack> tracks;

    Json to_json() const;
    static Scenario from_json(const Json& j);
};

// Builds a synthetic intersection lane graph. four_leg wires every approach
// to straight, left and right connectors (arcs); t_type drops the north leg
// and only wires the turns that remain legal. Deterministic per argument set.
LaneGraph build_intersection(IntersectionKind kind, int lanes_per_approach, std::uint64_t seed);

// Samples one route and cruise profile per agent and integrates kinematics at
// the 0.4 s tick: bounded acceleration, curvature-limited arc speeds, a 2.4 s
// lateral blend for lane changes, and a scripted stop rule (brake to the stop
// line while any crossing agent will occupy the junction within 3 s, resume
// after it clears). Pure function of (graph, spec); deterministic in the seed.
std::vector<AgentTrack> simulate(const LaneGraph& graph, const ScenarioSpec& spec);

Scenario generate_scenario(const ScenarioSpec& spec, const std::string& scenario_id);

// JSON Lines: one scenario object per line, stable key order.
void write_scenarios_jsonl(const std::filesystem::path& path,
                           const std::vector<Scenario>& scenarios);
std::vector<Scenario> read_scenarios_jsonl(const std::filesystem::path& path);

}  // namespace sapi

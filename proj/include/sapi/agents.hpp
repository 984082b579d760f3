#pragma once

#include <string>
#include <vector>

#include "sapi/common.hpp"

namespace sapi {

// Bounds enforced on every generated track (per 0.4 s tick).
inline constexpr double kMaxAccel = 4.0;              // m/s^2
inline constexpr double kMaxHeadingStepRad = 0.5;     // rad per tick

enum class Behavior { straight, turn_left, turn_right, lane_change, stop_for_traffic };

const char* to_string(Behavior b);
Behavior behavior_from_string(const std::string& s);

struct AgentState {
    Vec2 position;          // meters, world frame
    double heading = 0.0;   // radians
    double speed = 0.0;     // m/s, >= 0
    double length = 4.5;    // meters
    double width = 2.0;     // meters
    double footprint_size = 9.0;  // m^2, length * width

    static AgentState make(Vec2 position, double heading, double speed, double length,
                           double width);
};

void validate_agent_state(const AgentState& s);

struct AgentTrack {
    std::string agent_id;
    Behavior behavior_label = Behavior::straight;
    double t0 = 0.0;                 // timestamp of states[0]; spacing is kTickSeconds
    std::vector<AgentState> states;

    double time_at(std::size_t k) const { return t0 + static_cast<double>(k) * kTickSeconds; }
};

// Checks the per-step kinematic bounds and state invariants.
void validate_track(const AgentTrack& track);

}  // namespace sapi

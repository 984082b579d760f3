#include "sapi/agents.hpp"

#include <cmath>

namespace sapi {

const char* to_string(Behavior b) {
    switch (b) {
        case Behavior::straight: return "straight";
        case Behavior::turn_left: return "turn_left";
        case Behavior::turn_right: return "turn_right";
        case Behavior::lane_change: return "lane_change";
        case Behavior::stop_for_traffic: return "stop_for_traffic";
    }
    return "straight";
}

Behavior behavior_from_string(const std::string& s) {
    if (s == "straight") return Behavior::straight;
    if (s == "turn_left") return Behavior::turn_left;
    if (s == "turn_right") return Behavior::turn_right;
    if (s == "lane_change") return Behavior::lane_change;
    if (s == "stop_for_traffic") return Behavior::stop_for_traffic;
    throw ConfigError("unknown behavior label '" + s + "'");
}

AgentState AgentState::make(Vec2 position, double heading, double speed, double length,
                            double width) {
    AgentState s;
    s.position = position;
    s.heading = heading;
    s.speed = speed;
    s.length = length;
    s.width = width;
    s.footprint_size = length * width;
    return s;
}

void validate_agent_state(const AgentState& s) {
    if (s.speed < 0.0) throw ConfigError("agent speed must be >= 0");
    if (!(s.length > 0.0) || !(s.width > 0.0)) throw ConfigError("agent dimensions must be > 0");
    if (std::abs(s.footprint_size - s.length * s.width) > 1e-9)
        throw ConfigError("footprint_size inconsistent with length * width");
}

namespace {

double wrap_angle(double a) {
    a = std::fmod(a + M_PI, 2.0 * M_PI);
    if (a < 0.0) a += 2.0 * M_PI;
    return a - M_PI;
}

}  // namespace

void validate_track(const AgentTrack& track) {
    for (const AgentState& s : track.states) validate_agent_state(s);
    const double dv_max = kMaxAccel * kTickSeconds + 1e-9;
    for (std::size_t k = 1; k < track.states.size(); ++k) {
        double dv = track.states[k].speed - track.states[k - 1].speed;
        if (std::abs(dv) > dv_max)
            throw ConfigError("track '" + track.agent_id + "': speed step exceeds accel bound");
        double dh = wrap_angle(track.states[k].heading - track.states[k - 1].heading);
        if (std::abs(dh) > kMaxHeadingStepRad + 1e-9)
            throw ConfigError("track '" + track.agent_id + "': heading step exceeds bound");
    }
}

}  // namespace sapi

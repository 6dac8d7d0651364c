#pragma once

#include <limits>
#include <vector>

#include "optdrive/road.hpp"

namespace optdrive {

struct SafetyParams {
    double b = 6.0;              // m/s^2, worst-case deceleration of every vehicle
    double gap_safe = 5.0;       // m, minimum bumper-to-bumper distance after braking
    int interp_points = 5;       // states checked along a manoeuvre
    double reaction_time = 0.1;  // s, one simulation step before the follower reacts
    double lat_margin = 0.3;     // m, lateral clearance below which footprints count as overlapping
    double edge_margin = 0.1;    // m, clearance kept to the road edges
    double lat_lookahead = 1.0;  // s, lateral motion of neighbours anticipated by the lateral bounds
    double range = 200.0;        // m, longitudinal window for neighbours

    void validate(double vehicle_length) const;
};

struct ActionBounds {
    double dv_lb = 0.0;
    double dv_ub = 0.0;
    double dd_lb = 0.0;
    double dd_ub = 0.0;
};

// Another vehicle as seen from the subject vehicle. ds is the wrapped center-to-center
// longitudinal offset (positive ahead).
struct Neighbor {
    double ds = 0.0;
    double d = 0.0;
    double v = 0.0;
    double length = 4.5;
    double width = 1.8;
    double lat_rate = 0.0;
};

// Snapshot of a vehicle's surroundings: everything the safety layer and the options need.
struct Scene {
    double v = 0.0;
    double d = 0.0;
    double length = 4.5;
    double width = 1.8;
    double road_width = 10.5;
    double v_max = 36.11;
    double a_max = 3.0;
    double k_v = 1.0;  // longitudinal controller gain mapping velocity deltas to accelerations
    std::vector<Neighbor> others;
};

inline constexpr double kNoLeader = std::numeric_limits<double>::infinity();

double braking_margin(double gap, double v_lead, double v_follow, double b);
bool braking_criterion(double gap, double v_lead, double v_follow, const SafetyParams& p);

// Smallest bumper gap reached when the leader brakes at b from now on and the follower applies
// accel for one reaction step before braking at b as well.
double reaction_min_gap(double gap, double v_lead, double v_follow, double accel, const SafetyParams& p);

// Bumper-to-bumper gap between the subject and a neighbour (negative when they overlap).
double bumper_gap(const Scene& scene, const Neighbor& n);
double lateral_gap(double d_a, double width_a, double d_b, double width_b);

ActionBounds action_bounds(const Scene& scene, const SafetyParams& p);
bool safe_manoeuvre(const Scene& scene, const ActionBounds& bounds, double v_target, double d_target,
                    const SafetyParams& p);

double pwl_rescale(double a, double lb, double ub);

// Everything a decision maker needs at one step.
struct DecisionState {
    Scene scene;
    ActionBounds bounds;
    LaneOffsets lanes;
    SafetyParams safety;
};

DecisionState make_decision_state(Scene scene, const LaneOffsets& lanes, const SafetyParams& p);

}  // namespace optdrive

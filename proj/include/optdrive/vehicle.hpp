#pragma once

#include "optdrive/road.hpp"

namespace optdrive {

struct VehicleParams {
    double lf = 1.5;
    double lr = 1.5;
    double length = 4.5;
    double width = 1.8;
    double a_max = 3.0;
    double b = 6.0;  // maximum deceleration, shared with the safety layer
    double delta_max = 0.5;

    void validate() const;
};

// Global kinematic state plus its road-frame projection, refreshed after every step.
struct VehicleState {
    Pose pose;
    double v = 0.0;
    RoadFramePose frame;
    LaneOffsets lanes;
};

// Reference pair consumed by the motion controllers: relative velocity and lateral position.
struct ActionRef {
    double dv = 0.0;
    double dd = 0.0;
};

struct ControlInput {
    double accel = 0.0;
    double steer = 0.0;
};

struct ControllerGains {
    double k_v = 1.0;            // 1/s, longitudinal proportional gain
    double lat_speed_max = 0.8;  // m/s, lateral speed limit during manoeuvres
    double lat_decel = 0.3;      // m/s^2, lateral braking used when closing in on the reference
    double lat_gain = 2.0;       // 1/s, lateral speed per meter of error close to the reference
    double k_heading = 8.0;      // 1/s, heading error gain
    double low_speed_gain = 1.0;  // caps k_heading at this fraction of v/lr
};

// Builds a state on the road, with projection and lane offsets filled in.
VehicleState make_state(const RoadFramePose& frame, double v, const Road& road);

// One explicit Runge-Kutta step of the kinematic bicycle model. Does not refresh the projection.
VehicleState kbm_step(const VehicleState& state, const ControlInput& u, const VehicleParams& p, double dt);

// kbm_step followed by projection. When the vehicle crosses the loop seam the global pose is
// re-anchored at the wrapped arclength.
VehicleState advance(const VehicleState& state, const ControlInput& u, const VehicleParams& p, const Road& road,
                     double dt);

ControlInput track_references(const VehicleState& state, const ActionRef& ref, const VehicleParams& p,
                              const Road& road, const ControllerGains& g, double dt);

// Refresh frame and lane offsets from the global pose.
void refresh(VehicleState& state, const Road& road);

}  // namespace optdrive

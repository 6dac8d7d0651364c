#include "optdrive/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "optdrive/errors.hpp"

namespace optdrive {

void VehicleParams::validate() const {
    if (!(lf > 0 && lr > 0 && length > 0 && width > 0 && a_max > 0 && b > 0 && delta_max > 0))
        throw std::invalid_argument("vehicle parameters must be strictly positive");
}

VehicleState make_state(const RoadFramePose& frame, double v, const Road& road) {
    VehicleState s;
    RoadFramePose f = frame;
    f.s = road.wrap(f.s);
    s.pose = embed(f, road);
    s.v = v;
    refresh(s, road);
    return s;
}

void refresh(VehicleState& state, const Road& road) {
    state.frame = project(state.pose, road);
    state.lanes = lane_offsets(state.frame, road);
}

namespace {

// Time derivative of (x, y, psi, v) under constant inputs.
Eigen::Vector4d kbm_rhs(const Eigen::Vector4d& x, double accel, double slip, double lr) {
    const double v = std::max(x[3], 0.0);
    const double course = x[2] + slip;
    const double v_dot = (v <= 0.0 && accel < 0.0) ? 0.0 : accel / std::cos(slip);
    return {v * std::cos(course), v * std::sin(course), v / lr * std::sin(slip), v_dot};
}

}  // namespace

VehicleState kbm_step(const VehicleState& state, const ControlInput& u, const VehicleParams& p, double dt) {
    if (!std::isfinite(u.accel) || !std::isfinite(u.steer) || !std::isfinite(state.v) ||
        !state.pose.position.allFinite() || !std::isfinite(state.pose.heading))
        throw NonFiniteInput("kbm_step");
    const double slip = std::atan(p.lr / (p.lf + p.lr) * std::tan(u.steer));
    // One classical Runge-Kutta step; inputs are held constant over dt.
    const Eigen::Vector4d x0(state.pose.position.x(), state.pose.position.y(), state.pose.heading, state.v);
    const Eigen::Vector4d k1 = kbm_rhs(x0, u.accel, slip, p.lr);
    const Eigen::Vector4d k2 = kbm_rhs(x0 + 0.5 * dt * k1, u.accel, slip, p.lr);
    const Eigen::Vector4d k3 = kbm_rhs(x0 + 0.5 * dt * k2, u.accel, slip, p.lr);
    const Eigen::Vector4d k4 = kbm_rhs(x0 + dt * k3, u.accel, slip, p.lr);
    const Eigen::Vector4d x1 = x0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    VehicleState next = state;
    next.pose.position = x1.head<2>();
    next.pose.heading = wrap_angle(x1[2]);
    next.v = std::max(0.0, x1[3]);
    return next;
}

VehicleState advance(const VehicleState& state, const ControlInput& u, const VehicleParams& p, const Road& road,
                     double dt) {
    VehicleState next = kbm_step(state, u, p, dt);
    refresh(next, road);
    // Crossing the seam: re-anchor so the global pose agrees with the wrapped arclength.
    if (std::abs(next.frame.s - state.frame.s) > road.total_length() / 2) {
        next.pose = embed(next.frame, road);
        refresh(next, road);
    }
    return next;
}

ControlInput track_references(const VehicleState& state, const ActionRef& ref, const VehicleParams& p,
                              const Road& road, const ControllerGains& g, double dt) {
    if (!std::isfinite(ref.dv) || !std::isfinite(ref.dd)) throw NonFiniteInput("track_references");
    ControlInput u;
    const double v = state.v;
    if (v + ref.dv <= 0.0) {
        // A standstill request brakes at full deceleration until the vehicle stops.
        u.accel = -std::min(p.b, v / dt);
    } else {
        u.accel = std::clamp(g.k_v * ref.dv, -p.b, p.a_max);
    }

    // The course leads the heading by the slip angle; a gain above v/lr would swing it past the reference.
    const double v_eff = std::max(v, 0.5);
    const double k_heading = std::min(g.k_heading, g.low_speed_gain * v_eff / p.lr);
    // Lateral speed profile: capped cruise, constant lateral braking, then a linear tail whose gain
    // keeps the cascade with the heading loop critically damped.
    const double err = std::abs(ref.dd);
    const double lat_gain = std::min(g.lat_gain, k_heading / 4);
    const double mag = std::min({g.lat_speed_max, std::sqrt(2.0 * g.lat_decel * err), lat_gain * err});
    const double lat_speed = std::copysign(mag, ref.dd);
    const double heading_ref = std::asin(std::clamp(lat_speed / v_eff, -0.6, 0.6));

    const double kappa = road.curvature_at(state.frame.s);
    const double n = state.frame.d - road.width() / 2;
    const double e = state.frame.heading_err;
    const double s_rate = v * std::cos(e) / (1.0 - kappa * n);
    // On an arc the body points off the tangent by the steady slip angle; track the course instead.
    const double ff_rate = kappa * s_rate;
    const double ff_slip = std::asin(std::clamp(ff_rate * p.lr / v_eff, -0.99, 0.99));
    const double yaw_rate = ff_rate + k_heading * (heading_ref - (e + ff_slip));

    const double sin_slip = std::clamp(yaw_rate * p.lr / v_eff, -0.99, 0.99);
    const double slip = std::asin(sin_slip);
    const double steer = std::atan(std::tan(slip) * (p.lf + p.lr) / p.lr);
    u.steer = std::clamp(steer, -p.delta_max, p.delta_max);
    return u;
}

}  // namespace optdrive

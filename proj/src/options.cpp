#include "optdrive/options.hpp"

#include <algorithm>
#include <cmath>

namespace optdrive {

Axis axis_of(OptionId o) {
    switch (o) {
        case OptionId::VelDecrease:
        case OptionId::VelIncrease: return Axis::Longitudinal;
        case OptionId::LaneLeft:
        case OptionId::LaneRight: return Axis::Lateral;
        default: return Axis::Both;
    }
}

std::string_view name_of(OptionId o) {
    static constexpr std::array<std::string_view, kNumOptions> names{"emergency",    "maintain",  "vel_decrease",
                                                                     "vel_increase", "lane_left", "lane_right"};
    return names[index_of(o)];
}

bool in_longitudinal_set(OptionId o) { return axis_of(o) != Axis::Lateral; }
bool in_lateral_set(OptionId o) { return axis_of(o) != Axis::Longitudinal; }

int longitudinal_slot(OptionId o) {
    const auto it = std::find(kLongitudinalOptions.begin(), kLongitudinalOptions.end(), o);
    return it == kLongitudinalOptions.end() ? -1 : int(it - kLongitudinalOptions.begin());
}

int lateral_slot(OptionId o) {
    const auto it = std::find(kLateralOptions.begin(), kLateralOptions.end(), o);
    return it == kLateralOptions.end() ? -1 : int(it - kLateralOptions.begin());
}

OptionTargets targets(OptionId o, const DecisionState& s, const OptionConstants& c) {
    const double v = s.scene.v, d = s.scene.d;
    const ActionBounds& b = s.bounds;
    switch (o) {
        case OptionId::Emergency:
            return {std::clamp(0.0, v + b.dv_lb, v + b.dv_ub), std::clamp(d, d + b.dd_lb, d + b.dd_ub)};
        case OptionId::Maintain: return {v, d};
        case OptionId::VelDecrease: return {std::ceil(v / c.dv_step - 1) * c.dv_step, d};
        case OptionId::VelIncrease: return {std::floor(v / c.dv_step + 1) * c.dv_step, d};
        case OptionId::LaneLeft: return {v, d + s.lanes.left_primed};
        case OptionId::LaneRight: return {v, d + s.lanes.right_primed};
    }
    return {v, d};
}

namespace {

bool safe_for(OptionId o, const DecisionState& s, const OptionConstants& c) {
    const OptionTargets t = targets(o, s, c);
    return safe_manoeuvre(s.scene, s.bounds, t.v, t.d, s.safety);
}

}  // namespace

bool can_initiate(OptionId o, const DecisionState& s, const OptionConstants& c) {
    switch (o) {
        case OptionId::Emergency: return true;
        case OptionId::Maintain:
        case OptionId::VelDecrease:
        case OptionId::VelIncrease: return safe_for(o, s, c);
        case OptionId::LaneLeft:
        case OptionId::LaneRight: {
            const OptionTargets t = targets(o, s, c);
            return std::abs(t.d - s.scene.d) >= c.eps_d && s.scene.v >= c.v_min_lane && safe_for(o, s, c);
        }
    }
    return false;
}

bool should_terminate(OptionId o, const DecisionState& s, const OptionConstants& c) {
    switch (o) {
        case OptionId::Emergency:
        case OptionId::Maintain: return true;
        case OptionId::VelDecrease:
        case OptionId::VelIncrease: {
            const OptionTargets t = targets(o, s, c);
            return std::abs(t.v - s.scene.v) < c.eps_v || !safe_for(o, s, c);
        }
        case OptionId::LaneLeft:
        case OptionId::LaneRight: {
            const OptionTargets t = targets(o, s, c);
            return std::abs(t.d - s.scene.d) < c.eps_d || s.scene.v < c.v_min_lane || !safe_for(o, s, c);
        }
    }
    return true;
}

ActionRef option_policy(OptionId o, const DecisionState& s, const OptionConstants& c) {
    const OptionTargets t = targets(o, s, c);
    const ActionBounds& b = s.bounds;
    return {std::clamp(t.v - s.scene.v, b.dv_lb, b.dv_ub), std::clamp(t.d - s.scene.d, b.dd_lb, b.dd_ub)};
}

OptionMask available(const DecisionState& s, const OptionConstants& c) {
    OptionMask m;
    for (OptionId o : kAllOptions) m[index_of(o)] = can_initiate(o, s, c);
    return m;
}

OptionMask available(const DecisionState& s, OptionId active, const OptionConstants& c) {
    if (should_terminate(active, s, c)) return available(s, c);
    OptionMask m;
    m[index_of(active)] = true;
    return m;
}

OptionMask terminations(const DecisionState& s, const OptionConstants& c) {
    OptionMask m;
    for (OptionId o : kAllOptions) m[index_of(o)] = should_terminate(o, s, c);
    return m;
}

}  // namespace optdrive

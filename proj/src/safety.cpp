#include "optdrive/safety.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "optdrive/errors.hpp"

namespace optdrive {

void SafetyParams::validate(double vehicle_length) const {
    if (!(b > 0)) throw std::invalid_argument("safety: b must be positive");
    if (!(gap_safe >= vehicle_length)) throw std::invalid_argument("safety: gap_safe must be >= vehicle length");
    if (interp_points < 2) throw std::invalid_argument("safety: interp_points must be >= 2");
    if (!(reaction_time > 0)) throw std::invalid_argument("safety: reaction_time must be positive");
}

double braking_margin(double gap, double v_lead, double v_follow, double b) {
    if (gap == kNoLeader) return kNoLeader;
    return std::min(gap, gap + (v_lead * v_lead - v_follow * v_follow) / (2 * b));
}

bool braking_criterion(double gap, double v_lead, double v_follow, const SafetyParams& p) {
    return braking_margin(gap, v_lead, v_follow, p.b) > p.gap_safe;
}

namespace {

// Position and velocity after time t under constant acceleration, stopping at v = 0.
struct Motion {
    double x;
    double v;
};

Motion move(double v, double a, double t) {
    if (a < 0 && v + a * t < 0) {
        const double ts = -v / a;
        return {v * ts + 0.5 * a * ts * ts, 0.0};
    }
    return {v * t + 0.5 * a * t * t, v + a * t};
}

}  // namespace

double reaction_min_gap(double gap, double v_lead, double v_follow, double accel, const SafetyParams& p) {
    const double T = p.reaction_time;
    // Candidate times for the minimum within the reaction step: endpoints, stop instants and
    // instants of equal speed on each constant-acceleration piece.
    std::array<double, 6> cuts{0.0, T, T, T, T, T};
    int nc = 2;
    if (v_lead / p.b < T) cuts[nc++] = v_lead / p.b;
    if (accel < 0 && v_follow / -accel < T) cuts[nc++] = v_follow / -accel;
    std::sort(cuts.begin(), cuts.begin() + nc);

    auto gap_at = [&](double t) { return gap + move(v_lead, -p.b, t).x - move(v_follow, accel, t).x; };
    double best = std::min(gap_at(0.0), gap_at(T));
    for (int i = 0; i + 1 < nc; ++i) {
        const double t0 = cuts[i], t1 = cuts[i + 1];
        if (t1 <= t0) continue;
        const Motion l = move(v_lead, -p.b, t0), f = move(v_follow, accel, t0);
        const double al = l.v > 0 ? -p.b : 0.0;
        const double af = (accel < 0 && f.v <= 0) ? 0.0 : accel;
        const double rel_a = al - af;
        if (rel_a != 0.0) {
            const double tm = t0 - (l.v - f.v) / rel_a;
            if (tm > t0 && tm < t1) best = std::min(best, gap_at(tm));
        }
    }
    const Motion l = move(v_lead, -p.b, T), f = move(v_follow, accel, T);
    const double g1 = gap + l.x - f.x;
    return std::min(best, braking_margin(g1, l.v, f.v, p.b));
}

double bumper_gap(const Scene& scene, const Neighbor& n) {
    return std::abs(n.ds) - 0.5 * (scene.length + n.length);
}

double lateral_gap(double d_a, double width_a, double d_b, double width_b) {
    return std::abs(d_a - d_b) - 0.5 * (width_a + width_b);
}

ActionBounds action_bounds(const Scene& scene, const SafetyParams& p) {
    ActionBounds bounds;
    const double v = scene.v;
    bounds.dv_lb = -std::min(v, p.b / scene.k_v);
    double ub = std::min(scene.a_max / scene.k_v, scene.v_max - v);

    for (const Neighbor& n : scene.others) {
        if (n.ds <= 0 || n.ds > p.range) continue;
        if (lateral_gap(scene.d, scene.width, n.d, n.width) >= p.lat_margin) continue;
        const double gap = bumper_gap(scene, n);
        if (reaction_min_gap(gap, n.v, v, scene.a_max, p) > p.gap_safe) continue;
        if (!(reaction_min_gap(gap, n.v, v, -p.b, p) > p.gap_safe)) {
            ub = bounds.dv_lb;
            break;
        }
        double lo = -p.b, hi = scene.a_max;
        for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            (reaction_min_gap(gap, n.v, v, mid, p) > p.gap_safe ? lo : hi) = mid;
        }
        ub = std::min(ub, lo / scene.k_v);
    }
    bounds.dv_ub = std::max(ub, bounds.dv_lb);

    double dd_lb = std::min(0.5 * scene.width + p.edge_margin - scene.d, 0.0);
    double dd_ub = std::max(scene.road_width - 0.5 * scene.width - p.edge_margin - scene.d, 0.0);
    for (const Neighbor& n : scene.others) {
        if (std::abs(n.ds) > p.range) continue;
        const double lat = lateral_gap(scene.d, scene.width, n.d, n.width);
        const double gap = bumper_gap(scene, n);
        // Within the margin the longitudinal bounds take over, except alongside: they ignore followers.
        if (lat < p.lat_margin && gap > 0) continue;
        const bool pair_safe = gap > 0 && (n.ds > 0 ? braking_criterion(gap, n.v, v, p)
                                                    : braking_criterion(gap, v, n.v, p));
        if (pair_safe) continue;
        const bool to_left = n.d > scene.d;
        const double closing = std::max(0.0, to_left ? -n.lat_rate : n.lat_rate);
        const double room = std::max(0.0, lat - closing * p.lat_lookahead - p.lat_margin);
        if (to_left)
            dd_ub = std::min(dd_ub, room);
        else
            dd_lb = std::max(dd_lb, -room);
    }
    bounds.dd_lb = dd_lb;
    bounds.dd_ub = dd_ub;
    return bounds;
}

bool safe_manoeuvre(const Scene& scene, const ActionBounds& bounds, double v_target, double d_target,
                    const SafetyParams& p) {
    constexpr double tol = 1e-9;
    const double dv = v_target - scene.v, dd = d_target - scene.d;
    if (dv < bounds.dv_lb - tol || dv > bounds.dv_ub + tol) return false;
    if (dd < bounds.dd_lb - tol || dd > bounds.dd_ub + tol) return false;

    const int k = p.interp_points;
    for (int i = 0; i + 1 < k; ++i) {
        // Each piece between consecutive interpolated states is checked with its swept lateral
        // span and its worst speed, so no intermediate state can slip through.
        const double f0 = double(i) / (k - 1), f1 = double(i + 1) / (k - 1);
        const double d0 = scene.d + f0 * dd, d1 = scene.d + f1 * dd;
        const double v0 = scene.v + f0 * dv, v1 = scene.v + f1 * dv;
        const double lo = std::min(d0, d1) - 0.5 * scene.width, hi = std::max(d0, d1) + 0.5 * scene.width;
        for (const Neighbor& n : scene.others) {
            if (std::abs(n.ds) > p.range) continue;
            const double n_lo = n.d - 0.5 * n.width, n_hi = n.d + 0.5 * n.width;
            const double lat = std::max(n_lo - hi, lo - n_hi);
            if (lat >= p.lat_margin) continue;
            const double gap = bumper_gap(scene, n);
            if (n.ds > 0) {
                if (!braking_criterion(gap, n.v, std::max(v0, v1), p)) return false;
            } else {
                // A vehicle already behind in the current footprint is that vehicle's concern.
                if (lateral_gap(scene.d, scene.width, n.d, n.width) < p.lat_margin) continue;
                if (!braking_criterion(gap, std::min(v0, v1), n.v, p)) return false;
            }
        }
    }
    return true;
}

DecisionState make_decision_state(Scene scene, const LaneOffsets& lanes, const SafetyParams& p) {
    DecisionState ds;
    ds.bounds = action_bounds(scene, p);
    ds.scene = std::move(scene);
    ds.lanes = lanes;
    ds.safety = p;
    return ds;
}

double pwl_rescale(double a, double lb, double ub) {
    if (lb > ub) throw BoundsInverted("pwl_rescale: lb > ub");
    const double z = std::clamp(0.0, lb, ub);
    a = std::clamp(a, -1.0, 1.0);
    return a >= 0 ? z + a * (ub - z) : z + a * (z - lb);
}

}  // namespace optdrive

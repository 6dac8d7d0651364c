#include "optdrive/env.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "optdrive/errors.hpp"

namespace optdrive {

void EnvConfig::validate() const {
    vehicle.validate();
    safety.validate(vehicle.length);
    idm.validate();
    mobil.validate(vehicle.b);
    if (safety.b != vehicle.b) throw std::invalid_argument("safety b must equal vehicle b");
    if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
    if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (!(weights.follow >= 0 && weights.speed >= 0 && weights.centre >= 0 && weights.right >= 0))
        throw std::invalid_argument("reward weights must be non-negative");
    if (!(weights.follow + weights.speed + weights.centre + weights.right > 0))
        throw std::invalid_argument("reward weights must not all be zero");
    if (!(obs_range > 0)) throw std::invalid_argument("obs_range must be positive");
}

double reward_value(const RewardTerms& t, const RewardWeights& w) {
    const double sum = w.follow + w.speed + w.centre + w.right;
    return (w.follow * t.follow + w.speed * t.speed + w.centre * t.centre + w.right * t.right) / sum;
}

namespace {

// Width of a yawed footprint measured across the road. A car stopped at an angle mid lane change
// reaches into the neighbouring lane further than its nominal width.
double lateral_extent(double heading_err, double length, double width) {
    return length * std::abs(std::sin(heading_err)) + width * std::cos(heading_err);
}

}  // namespace

Scene scene_for(const std::vector<SimVehicle>& fleet, std::size_t index, const EnvConfig& cfg) {
    const SimVehicle& me = fleet[index];
    Scene sc;
    sc.v = me.state.v;
    sc.d = me.state.frame.d;
    sc.length = cfg.vehicle.length;
    sc.width = lateral_extent(me.state.frame.heading_err, cfg.vehicle.length, cfg.vehicle.width);
    sc.road_width = cfg.road.width();
    sc.v_max = cfg.v_max();
    sc.a_max = cfg.vehicle.a_max;
    sc.k_v = cfg.gains.k_v;
    const double reach = std::max(cfg.safety.range, cfg.obs_range + cfg.vehicle.length);
    for (std::size_t j = 0; j < fleet.size(); ++j) {
        if (j == index) continue;
        const VehicleState& o = fleet[j].state;
        const double ds = cfg.road.delta_s(me.state.frame.s, o.frame.s);
        if (std::abs(ds) > reach) continue;
        Neighbor n;
        n.ds = ds;
        n.d = o.frame.d;
        n.v = o.v;
        n.length = cfg.vehicle.length;
        n.width = lateral_extent(o.frame.heading_err, cfg.vehicle.length, cfg.vehicle.width);
        n.lat_rate = o.v * std::sin(o.frame.heading_err);
        sc.others.push_back(n);
    }
    return sc;
}

RewardTerms reward_terms(const Scene& scene, const LaneOffsets& lanes, const EnvConfig& cfg) {
    RewardTerms t;
    const double v_max = cfg.v_max();
    double gap = kNoLeader;
    for (const Neighbor& n : scene.others)
        if (n.ds > 0 && lateral_gap(scene.d, scene.width, n.d, n.width) < cfg.safety.lat_margin)
            gap = std::min(gap, bumper_gap(scene, n));
    if (gap != kNoLeader) {
        const double ref = std::max(cfg.safety.gap_safe, scene.v * cfg.reward_headway);
        t.follow = -std::clamp(1.0 - gap / ref, 0.0, 1.0);
    }
    t.speed = -std::min(1.0, std::abs(scene.v - v_max) / v_max);
    t.centre = -std::min(1.0, std::abs(lanes.own) / (cfg.road.lane_width() / 2));

    const Road& road = cfg.road;
    if (road.lane_count() > 1) {
        const int lane = road.lane_index(scene.d);
        int free = 0;
        for (int k = 0; k < lane; ++k) {
            const double lo = k * road.lane_width(), hi = lo + road.lane_width();
            bool ok = true;
            for (const Neighbor& n : scene.others) {
                if (std::min(hi, n.d + n.width / 2) - std::max(lo, n.d - n.width / 2) <= 0.0) continue;
                const double g = bumper_gap(scene, n);
                ok = g > 0 && (n.ds > 0 ? braking_criterion(g, n.v, scene.v, cfg.safety)
                                        : braking_criterion(g, scene.v, n.v, cfg.safety));
                if (!ok) break;
            }
            free += ok ? 1 : 0;
        }
        t.right = -double(free) / (road.lane_count() - 1);
    }
    return t;
}

Observation observe(const Scene& scene, const LaneOffsets& lanes, double curvature, const EnvConfig& cfg) {
    Observation o;
    const Road& road = cfg.road;
    const double v_max = cfg.v_max();
    o << scene.v, v_max - scene.v, lanes.own, lanes.right_primed, lanes.left_primed, scene.d,
        road.width() - scene.d, curvature, Eigen::Matrix<double, 18, 1>::Zero();
    const int lane = road.lane_index(scene.d);
    const double D = cfg.obs_range;
    for (int k = 0; k < 3; ++k) {
        const int target = lane - 1 + k;
        const Neighbor* lead = nullptr;
        const Neighbor* follow = nullptr;
        if (target >= 0 && target < road.lane_count()) {
            for (const Neighbor& n : scene.others) {
                if (road.lane_index(n.d) != target || n.ds == 0.0) continue;
                if (n.ds > 0 && (!lead || n.ds < lead->ds)) lead = &n;
                if (n.ds < 0 && (!follow || n.ds > follow->ds)) follow = &n;
            }
        }
        const int base = 8 + 6 * k;
        auto fill = [&](int at, const Neighbor* n) {
            if (!n || std::abs(n->ds) > D + scene.length) {
                o.segment<3>(at) << D, 0.0, 0.0;
                return;
            }
            o.segment<3>(at) << std::clamp(bumper_gap(scene, *n), -D, D), n->v - scene.v, n->d - scene.d;
        };
        fill(base, lead);
        fill(base + 3, follow);
    }
    return o;
}

Observation normalise(const Observation& raw, const EnvConfig& cfg) {
    Observation scale;
    const double v_max = cfg.v_max(), w = cfg.road.lane_width(), W = cfg.road.width();
    scale << v_max, v_max, w, w, w, W, W, 1.0 / 400.0, Eigen::Matrix<double, 18, 1>::Zero();
    for (int k = 0; k < 6; ++k) scale.segment<3>(8 + 3 * k) << cfg.obs_range, cfg.obs_speed_scale, 2 * w;
    return raw.cwiseQuotient(scale);
}

bool footprints_overlap(double ds, double d_a, double psi_a, double len_a, double wid_a, double d_b, double psi_b,
                        double len_b, double wid_b) {
    const Eigen::Vector2d ca(0.0, d_a), cb(ds, d_b);
    const std::array<Eigen::Vector2d, 2> ax_a{Eigen::Vector2d(std::cos(psi_a), std::sin(psi_a)),
                                              Eigen::Vector2d(-std::sin(psi_a), std::cos(psi_a))};
    const std::array<Eigen::Vector2d, 2> ax_b{Eigen::Vector2d(std::cos(psi_b), std::sin(psi_b)),
                                              Eigen::Vector2d(-std::sin(psi_b), std::cos(psi_b))};
    const Eigen::Vector2d half_a(len_a / 2, wid_a / 2), half_b(len_b / 2, wid_b / 2);
    const Eigen::Vector2d delta = cb - ca;
    auto separated = [&](const Eigen::Vector2d& axis) {
        double ra = 0.0, rb = 0.0;
        for (int i = 0; i < 2; ++i) {
            ra += half_a[i] * std::abs(ax_a[i].dot(axis));
            rb += half_b[i] * std::abs(ax_b[i].dot(axis));
        }
        return std::abs(delta.dot(axis)) > ra + rb;
    };
    for (const auto& ax : ax_a)
        if (separated(ax)) return false;
    for (const auto& ax : ax_b)
        if (separated(ax)) return false;
    return true;
}

bool footprints_overlap(double ds, double d_a, double psi_a, double d_b, double psi_b, double length,
                        double width) {
    return footprints_overlap(ds, d_a, psi_a, length, width, d_b, psi_b, length, width);
}

std::vector<bool> collision_check(const std::vector<SimVehicle>& fleet, const EnvConfig& cfg) {
    const double len = cfg.vehicle.length, wid = cfg.vehicle.width, W = cfg.road.width();
    std::vector<bool> hit(fleet.size(), false);
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const RoadFramePose& a = fleet[i].state.frame;
        if (a.d < wid / 2 || a.d > W - wid / 2) hit[i] = true;
        for (std::size_t j = i + 1; j < fleet.size(); ++j) {
            const RoadFramePose& b = fleet[j].state.frame;
            const double ds = cfg.road.delta_s(a.s, b.s);
            if (std::abs(ds) > len + wid || std::abs(a.d - b.d) > len + wid) continue;
            if (footprints_overlap(ds, a.d, a.heading_err, b.d, b.heading_err, len, wid)) hit[i] = hit[j] = true;
        }
    }
    return hit;
}

namespace {

IdmParams personal_idm(const SimVehicle& me, const EnvConfig& cfg) {
    IdmParams p = cfg.idm;
    p.v0 = me.target_speed;
    return p;
}

}  // namespace

ActionRef idm_mobil_drive(SimVehicle& me, const Scene& scene, const EnvConfig& cfg) {
    const Road& road = cfg.road;
    const double d = me.state.frame.d;
    const int lane = road.lane_index(d);
    const bool changing = std::abs(road.lane_center(me.target_lane) - d) > 0.25;
    if (changing) {
        if (me.target_lane != me.origin_lane &&
            !lane_change_clear(scene, me.origin_lane, me.target_lane, road, cfg.safety))
            me.target_lane = me.origin_lane;
    } else {
        me.origin_lane = me.target_lane;
        if (me.cooldown <= 0.0) {
            MobilSubject subj{scene.v, scene.length, personal_idm(me, cfg)};
            IdmParams others = cfg.idm;
            others.v0 = cfg.v_max();
            const LaneDecision dec =
                mobil_decide(subj, lane_neighbors(scene, lane, road), lane_neighbors(scene, lane + 1, road),
                             lane_neighbors(scene, lane - 1, road), cfg.mobil, others);
            const int to = dec == LaneDecision::Left ? lane + 1 : dec == LaneDecision::Right ? lane - 1 : lane;
            if (to != lane && lane_change_clear(scene, lane, to, road, cfg.safety)) {
                me.origin_lane = lane;
                me.target_lane = to;
                me.cooldown = cfg.mobil_cooldown;
            }
        }
    }

    const IdmParams idm = personal_idm(me, cfg);
    double gap = kNoLeader, v_lead = 0.0;
    for (const Neighbor& n : scene.others) {
        if (n.ds <= 0 || lateral_gap(scene.d, scene.width, n.d, n.width) >= cfg.safety.lat_margin) continue;
        const double g = bumper_gap(scene, n);
        if (g < gap) {
            gap = g;
            v_lead = n.v;
        }
    }
    double acc = idm_accel(std::max(gap, 0.1), scene.v, v_lead, idm);
    if (me.target_lane != lane) {
        const LaneNeighbors tl = lane_neighbors(scene, me.target_lane, road);
        acc = std::min(acc, idm_accel(std::max(tl.lead_gap, 0.1), scene.v, tl.lead_v, idm));
    }
    return {acc / cfg.gains.k_v, road.lane_center(me.target_lane) - d};
}

ActionRef rule_drive(const SimVehicle& me, const Scene& scene, const EnvConfig& cfg) {
    const Road& road = cfg.road;
    const int lane = road.lane_index(scene.d);
    RuleObservation obs;
    obs.v = scene.v;
    obs.v_target = me.target_speed;
    obs.lanes = me.state.lanes;
    obs.current = lane_neighbors(scene, lane, road);
    obs.left = lane_neighbors(scene, lane + 1, road);
    obs.right = lane_neighbors(scene, lane - 1, road);
    ActionRef a = rule_based_policy(obs, cfg.rule);
    const int to = road.lane_index(scene.d + a.dd);
    if (to != lane && !lane_change_clear(scene, lane, to, road, cfg.safety)) a.dd = obs.lanes.own;
    return a;
}

HighwayEnv::HighwayEnv(EnvConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

Observation HighwayEnv::reset(std::uint64_t seed, double density) {
    return reset(spawn_traffic(cfg_.road, density, seed, cfg_.spawn, cfg_.vehicle, cfg_.safety));
}

Observation HighwayEnv::reset(std::vector<SpawnedVehicle> vehicles) {
    if (vehicles.empty()) throw std::invalid_argument("reset needs at least the ego vehicle");
    fleet_.clear();
    for (SpawnedVehicle& sv : vehicles) {
        SimVehicle v;
        v.state = sv.state;
        v.driver = sv.driver;
        v.target_speed = sv.target_speed;
        v.target_lane = v.origin_lane = cfg_.road.lane_index(sv.state.frame.d);
        fleet_.push_back(v);
    }
    fleet_.front().driver = Driver::Ego;
    t_ = 0;
    finished_ = false;
    traffic_collisions_ = 0;
    refresh_views();
    return obs_;
}

void HighwayEnv::refresh_views() {
    Scene sc = scene_for(fleet_, 0, cfg_);
    decision_ = make_decision_state(std::move(sc), ego().lanes, cfg_.safety);
    obs_ = observe(decision_.scene, ego().lanes, cfg_.road.curvature_at(ego().frame.s), cfg_);
}

StepResult HighwayEnv::step(const ActionRef& ego_action) {
    if (finished_) throw EpisodeFinished("step called on a finished episode");
    if (!std::isfinite(ego_action.dv) || !std::isfinite(ego_action.dd)) throw NonFiniteInput("ego action");
    StepResult res;
    constexpr double tol = 1e-6;
    const ActionBounds& eb = decision_.bounds;
    res.ego_in_bounds = ego_action.dv >= eb.dv_lb - tol && ego_action.dv <= eb.dv_ub + tol &&
                        ego_action.dd >= eb.dd_lb - tol && ego_action.dd <= eb.dd_ub + tol;

    std::vector<ActionRef> refs(fleet_.size());
    refs[0] = ego_action;
    for (std::size_t i = 1; i < fleet_.size(); ++i) {
        SimVehicle& me = fleet_[i];
        const Scene sc = scene_for(fleet_, i, cfg_);
        const ActionBounds b = action_bounds(sc, cfg_.safety);
        ActionRef r = me.driver == Driver::RuleBased ? rule_drive(me, sc, cfg_) : idm_mobil_drive(me, sc, cfg_);
        r.dv = std::clamp(r.dv, b.dv_lb, b.dv_ub);
        r.dd = std::clamp(r.dd, b.dd_lb, b.dd_ub);
        refs[i] = r;
        me.cooldown -= cfg_.dt;
    }
    for (std::size_t i = 0; i < fleet_.size(); ++i) {
        VehicleState& st = fleet_[i].state;
        const ControlInput u = track_references(st, refs[i], cfg_.vehicle, cfg_.road, cfg_.gains, cfg_.dt);
        st = advance(st, u, cfg_.vehicle, cfg_.road, cfg_.dt);
    }
    ++t_;

    const std::vector<bool> hit = collision_check(fleet_, cfg_);
    for (std::size_t i = 1; i < hit.size(); ++i) traffic_collisions_ += hit[i] ? 1 : 0;
    refresh_views();
    res.obs = obs_;
    res.terms = reward_terms(decision_.scene, ego().lanes, cfg_);
    res.reward = reward_value(res.terms, cfg_.weights);
    res.terminated = hit[0];
    if (res.terminated) res.reward += cfg_.weights.collision_penalty;
    res.truncated = t_ >= cfg_.max_steps;
    finished_ = res.terminated || res.truncated;
    return res;
}

}  // namespace optdrive

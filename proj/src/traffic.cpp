#include "optdrive/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "optdrive/errors.hpp"

namespace optdrive {

void IdmParams::validate() const {
    if (!(v0 > 0 && T_headway > 0 && s0 > 0 && a > 0 && b_comf > 0 && exponent > 0 && clamp_factor > 0))
        throw std::invalid_argument("idm parameters must be positive");
}

void MobilParams::validate(double b) const {
    if (!(politeness >= 0 && politeness <= 1)) throw std::invalid_argument("mobil politeness must be in [0,1]");
    if (!(b_safe > 0 && b_safe <= b)) throw std::invalid_argument("mobil b_safe must be in (0, b]");
}

double idm_accel(double gap, double v, double v_lead, const IdmParams& p) {
    if (!(gap > 0)) throw NonPositiveGap("idm_accel");
    const double interaction = v * p.T_headway + v * (v - v_lead) / (2 * std::sqrt(p.a * p.b_comf));
    const double s_star = p.s0 + std::max(0.0, interaction);
    const double ratio = gap == kNoLeader ? 0.0 : s_star / gap;
    const double acc = p.a * (1 - std::pow(v / p.v0, p.exponent) - ratio * ratio);
    return std::clamp(acc, -p.b_comf * p.clamp_factor, p.a);
}

LaneNeighbors lane_neighbors(const Scene& scene, int lane, const Road& road) {
    LaneNeighbors out;
    if (lane < 0 || lane >= road.lane_count()) return out;
    out.exists = true;
    const double lo = lane * road.lane_width(), hi = (lane + 1) * road.lane_width();
    for (const Neighbor& n : scene.others) {
        if (std::min(hi, n.d + n.width / 2) - std::max(lo, n.d - n.width / 2) <= 0.0) continue;
        const double gap = bumper_gap(scene, n);
        if (n.ds > 0) {
            if (gap < out.lead_gap) {
                out.lead_gap = gap;
                out.lead_v = n.v;
            }
        } else if (gap < out.follow_gap) {
            out.follow_gap = gap;
            out.follow_v = n.v;
        }
    }
    return out;
}

namespace {

double idm_or_free(double gap, double v, double v_lead, const IdmParams& p) {
    return idm_accel(std::max(gap, 0.1), v, v_lead, p);
}

struct Evaluation {
    bool safe;
    double incentive;
};

Evaluation evaluate(const MobilSubject& me, const LaneNeighbors& cur, const LaneNeighbors& tgt, const MobilParams& p,
                    const IdmParams& others) {
    if (!tgt.exists) return {false, 0.0};
    if (tgt.lead_gap <= 0 || tgt.follow_gap <= 0) return {false, 0.0};
    const double a_c = idm_or_free(cur.lead_gap, me.v, cur.lead_v, me.idm);
    const double a_c_new = idm_or_free(tgt.lead_gap, me.v, tgt.lead_v, me.idm);

    double gain_new = 0.0;
    if (tgt.follow_gap != kNoLeader) {
        const double through = tgt.lead_gap == kNoLeader ? kNoLeader : tgt.follow_gap + me.length + tgt.lead_gap;
        const double a_n = idm_or_free(through, tgt.follow_v, tgt.lead_v, others);
        const double a_n_new = idm_or_free(tgt.follow_gap, tgt.follow_v, me.v, others);
        if (a_n_new < -p.b_safe) return {false, 0.0};
        gain_new = a_n_new - a_n;
    }
    double gain_old = 0.0;
    if (cur.follow_gap != kNoLeader) {
        const double through = cur.lead_gap == kNoLeader ? kNoLeader : cur.follow_gap + me.length + cur.lead_gap;
        const double a_o = idm_or_free(cur.follow_gap, cur.follow_v, me.v, others);
        const double a_o_new = idm_or_free(through, cur.follow_v, cur.lead_v, others);
        gain_old = a_o_new - a_o;
    }
    return {true, a_c_new - a_c + p.politeness * (gain_new + gain_old)};
}

}  // namespace

LaneDecision mobil_decide(const MobilSubject& subject, const LaneNeighbors& current, const LaneNeighbors& left,
                          const LaneNeighbors& right, const MobilParams& p, const IdmParams& idm_others) {
    const Evaluation l = evaluate(subject, current, left, p, idm_others);
    const Evaluation r = evaluate(subject, current, right, p, idm_others);
    const bool go_left = l.safe && l.incentive > p.a_thresh + p.bias_right;
    const bool go_right = r.safe && r.incentive > p.a_thresh - p.bias_right;
    if (go_left && go_right) return l.incentive - p.bias_right > r.incentive + p.bias_right ? LaneDecision::Left
                                                                                           : LaneDecision::Right;
    if (go_left) return LaneDecision::Left;
    if (go_right) return LaneDecision::Right;
    return LaneDecision::Stay;
}

ActionRef rule_based_policy(const RuleObservation& obs, const RuleParams& p) {
    ActionRef a;
    const double desired = p.s0 + obs.v * p.T_headway;
    const LaneNeighbors& cur = obs.current;
    a.dv = cur.lead_gap < desired ? cur.lead_v - obs.v : obs.v_target - obs.v;
    a.dd = obs.lanes.own;

    auto room = [&](const LaneNeighbors& l, double ahead) {
        return l.exists && l.lead_gap >= ahead && l.follow_gap >= p.gap_behind;
    };
    const bool blocked = cur.lead_gap < 2 * desired && cur.lead_v < obs.v_target - p.blocked_margin;
    if (blocked) {
        if (room(obs.left, p.gap_ahead))
            a.dd = obs.lanes.left;
        else if (room(obs.right, p.gap_ahead))
            a.dd = obs.lanes.right;
    } else if (room(obs.right, std::max(p.keep_right_gap, 2 * desired)) &&
               (obs.right.lead_gap == kNoLeader || obs.right.lead_v >= obs.v_target - p.blocked_margin)) {
        a.dd = obs.lanes.right;
    }
    return a;
}

bool lane_change_clear(const Scene& scene, int from_lane, int to_lane, const Road& road, const SafetyParams& p) {
    if (to_lane < 0 || to_lane >= road.lane_count()) return false;
    const int beyond = to_lane + (to_lane - from_lane);
    const double w = road.lane_width();
    auto reaches = [&](const Neighbor& n, int lane) {
        if (lane < 0 || lane >= road.lane_count()) return false;
        return std::min((lane + 1) * w, n.d + n.width / 2) - std::max(lane * w, n.d - n.width / 2) > 0.0;
    };
    for (const Neighbor& n : scene.others) {
        if (std::abs(n.ds) > p.range) continue;
        if (!reaches(n, to_lane) && !reaches(n, beyond)) continue;
        const double gap = bumper_gap(scene, n);
        if (gap <= 0) return false;
        const bool ok = n.ds > 0 ? braking_criterion(gap, n.v, scene.v, p) : braking_criterion(gap, scene.v, n.v, p);
        if (!ok) return false;
    }
    return true;
}

std::vector<SpawnedVehicle> spawn_traffic(const Road& road, double density, std::uint64_t seed,
                                          const SpawnParams& sp, const VehicleParams& vp,
                                          const SafetyParams& safety) {
    if (!(density >= 0) || !std::isfinite(density)) throw std::invalid_argument("density must be >= 0");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double L = road.total_length();
    const int n_traffic = static_cast<int>(std::lround(density * L / 1000.0));

    struct Slot {
        int id;
        double v;
    };
    std::vector<SpawnedVehicle> out(n_traffic + 1);
    std::vector<std::vector<Slot>> lanes(road.lane_count());
    for (int i = 0; i <= n_traffic; ++i) {
        const int lane = std::min(road.lane_count() - 1, static_cast<int>(unit(rng) * road.lane_count()));
        const double target = sp.v_max * (sp.speed_lo + (sp.speed_hi - sp.speed_lo) * unit(rng));
        out[i].target_speed = i == 0 ? sp.v_max : target;
        out[i].driver = i == 0 ? Driver::Ego : (unit(rng) < sp.idm_share ? Driver::IdmMobil : Driver::RuleBased);
        lanes[lane].push_back({i, target});
        out[i].state.frame.d = road.lane_center(lane);
    }

    auto needed = [&](double v_follow, double v_lead) {
        return vp.length + safety.gap_safe + sp.spare_gap +
               std::max(0.0, (v_follow * v_follow - v_lead * v_lead) / (2 * safety.b));
    };
    for (auto& lane : lanes) {
        if (lane.empty()) continue;
        std::shuffle(lane.begin(), lane.end(), rng);
        const std::size_t m = lane.size();
        auto total = [&] {
            double t = 0.0;
            if (m > 1)
                for (std::size_t k = 0; k < m; ++k) t += needed(lane[k].v, lane[(k + 1) % m].v);
            return t;
        };
        double req = total();
        if (req > L) {
            // Faster vehicles ahead of slower ones leave only the wrap-around pair needing extra room.
            std::sort(lane.begin(), lane.end(), [](const Slot& a, const Slot& b) { return a.v < b.v; });
            req = total();
            if (req > L) throw DensityInfeasible("density " + std::to_string(density) + " veh/km");
        }
        std::vector<double> weights(m);
        std::exponential_distribution<double> expo(1.0);
        for (double& w : weights) w = expo(rng);
        const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
        double s = L * unit(rng);
        for (std::size_t k = 0; k < m; ++k) {
            out[lane[k].id].state.frame.s = road.wrap(s);
            if (k + 1 < m) s += needed(lane[k].v, lane[k + 1].v) + (L - req) * weights[k] / wsum;
        }
    }
    for (const auto& lane : lanes)
        for (const Slot& sl : lane) {
            VehicleState& st = out[sl.id].state;
            st = make_state({st.frame.s, st.frame.d, 0.0}, sl.v, road);
        }
    return out;
}

}  // namespace optdrive

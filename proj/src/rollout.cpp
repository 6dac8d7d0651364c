#include "optdrive/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace optdrive {

ActivityKind activity_kind(AgentKind k) {
    switch (k) {
        case AgentKind::Continuous: return ActivityKind::None;
        case AgentKind::Single: return ActivityKind::Single;
        case AgentKind::Combined: return ActivityKind::PerAxis;
        case AgentKind::Hybrid: return ActivityKind::LateralOnly;
    }
    return ActivityKind::None;
}

EpisodeStats summarise(const std::vector<StepRecord>& trace, ActivityKind activity, const EnvConfig& cfg,
                       double eps_d) {
    EpisodeStats st;
    st.activity = activity;
    st.steps = int(trace.size());
    if (trace.empty()) return st;
    const Road& road = cfg.road;

    double speed = 0, follow = 0, right = 0, dev = 0;
    int follow_n = 0;
    int prev_lane = -1;
    // Lane-change timing: start at the last step centred in the old lane, end when centred in the new one.
    double anchor = 0.0;
    int pending = -1;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const StepRecord& r = trace[i];
        st.ret += r.reward;
        st.collisions += r.collision ? 1 : 0;
        speed += r.v;
        if (r.lead_gap < cfg.obs_range) {
            follow += r.lead_gap;
            ++follow_n;
        }
        right += r.lane == 0 ? 1 : 0;
        dev += std::abs(r.c0);
        if (prev_lane >= 0 && r.lane != prev_lane) {
            ++st.lane_changes;
            pending = r.lane;
        }
        const bool centred = std::abs(road.lane_center(r.lane) - r.d) < eps_d;
        if (pending >= 0 && r.lane == pending && centred) {
            st.lane_change_durations.push_back(r.t - anchor);
            pending = -1;
        }
        if (pending < 0 && centred) anchor = r.t;
        prev_lane = r.lane;

        switch (activity) {
            case ActivityKind::None: break;
            case ActivityKind::Single: st.act[std::size_t(r.option)] += 1; break;
            case ActivityKind::PerAxis:
                st.act_v[std::size_t(r.o_v)] += 1;
                st.act_d[std::size_t(r.o_d)] += 1;
                break;
            case ActivityKind::LateralOnly: st.act_d[std::size_t(r.o_d)] += 1; break;
        }
    }
    const double n = double(trace.size());
    st.mean_speed = speed / n;
    st.mean_following = follow_n > 0 ? follow / follow_n : std::numeric_limits<double>::quiet_NaN();
    st.right_lane = right / n;
    st.centre_dev = dev / n;
    for (double& a : st.act) a /= n;
    for (double& a : st.act_v) a /= n;
    for (double& a : st.act_d) a /= n;
    return st;
}

EgoPolicy agent_policy(Agent& agent, Exploration ex, std::mt19937_64& rng) {
    agent.begin_episode();
    return [&agent, ex, &rng](HighwayEnv&, const StepView& view) { return agent.act(view, ex, rng); };
}

EgoPolicy idm_mobil_policy() {
    return [](HighwayEnv& env, const StepView& view) {
        SimVehicle& me = env.ego_driver();
        const Scene sc = scene_for(env.fleet(), 0, env.config());
        ActionRef r = idm_mobil_drive(me, sc, env.config());
        me.cooldown -= env.config().dt;
        // Same clipping the simulated traffic gets.
        const ActionBounds& b = view.ds->bounds;
        r.dv = std::clamp(r.dv, b.dv_lb, b.dv_ub);
        r.dd = std::clamp(r.dd, b.dd_lb, b.dd_ub);
        Choice c;
        c.action = r;
        return c;
    };
}

StepRecord record_step(const HighwayEnv& env, const ActionBounds& bounds, const Choice& c, const StepResult& r,
                       ActivityKind activity) {
    StepRecord s;
    s.t = env.t() * env.config().dt;
    s.v = env.ego().v;
    s.d = env.ego().frame.d;
    s.lane = env.config().road.lane_index(s.d);
    s.c0 = env.ego().lanes.own;
    s.lead_gap = r.obs[14];
    s.reward = r.reward;
    s.collision = r.terminated;
    s.action = c.action;
    s.bounds = bounds;
    switch (activity) {
        case ActivityKind::None: break;
        case ActivityKind::Single: s.option = index_of(c.option); break;
        case ActivityKind::PerAxis:
            s.o_v = longitudinal_slot(c.o_v);
            s.o_d = lateral_slot(c.o_d);
            break;
        case ActivityKind::LateralOnly: s.o_d = lateral_slot(c.o_d); break;
    }
    return s;
}

std::vector<StepRecord> run_episode(HighwayEnv& env, const EgoPolicy& policy, ActivityKind activity) {
    std::vector<StepRecord> trace;
    trace.reserve(std::size_t(env.config().max_steps));
    while (!env.finished()) {
        const StepView view = make_view(env);
        const ActionBounds bounds = view.ds->bounds;
        const Choice c = policy(env, view);
        const StepResult r = env.step(c.action);
        trace.push_back(record_step(env, bounds, c, r, activity));
    }
    return trace;
}

}  // namespace optdrive

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "optdrive/env.hpp"
#include "optdrive/options.hpp"

namespace optdrive {
namespace {

const Road kRoad = Road::standard();

DecisionState state_at(double v, double d, std::vector<Neighbor> others = {}) {
    Scene s;
    s.v = v;
    s.d = d;
    s.others = std::move(others);
    return make_decision_state(s, lane_offsets({0, d, 0}, kRoad), SafetyParams{});
}

TEST(Targets, VelocityLatticeExamples) {
    EXPECT_DOUBLE_EQ(targets(OptionId::VelDecrease, state_at(5.0, 5.25)).v, 4.0);
    EXPECT_DOUBLE_EQ(targets(OptionId::VelIncrease, state_at(5.0, 5.25)).v, 6.0);
    EXPECT_DOUBLE_EQ(targets(OptionId::VelDecrease, state_at(4.0, 5.25)).v, 2.0);
    EXPECT_DOUBLE_EQ(targets(OptionId::VelIncrease, state_at(4.0, 5.25)).v, 6.0);
    EXPECT_DOUBLE_EQ(targets(OptionId::VelIncrease, state_at(4.0, 5.25)).d, 5.25);
}

// Nearest lattice points strictly below and above, found by enumeration.
TEST(Targets, LatticeMatchesEnumeration) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 36.11);
    for (int i = 0; i < 2000; ++i) {
        const double v = i < 19 ? 2.0 * i : u(rng);
        double below = -1e9, above = 1e9;
        for (int k = -1; k <= 20; ++k) {
            const double m = 2.0 * k;
            if (m < v) below = std::max(below, m);
            if (m > v) above = std::min(above, m);
        }
        const DecisionState s = state_at(v, 1.75);
        ASSERT_DOUBLE_EQ(targets(OptionId::VelDecrease, s).v, below) << v;
        ASSERT_DOUBLE_EQ(targets(OptionId::VelIncrease, s).v, above) << v;
    }
}

TEST(Targets, MaintainAndLaneChanges) {
    const DecisionState s = state_at(20, 5.25 + 0.5);
    EXPECT_DOUBLE_EQ(targets(OptionId::Maintain, s).v, 20);
    EXPECT_DOUBLE_EQ(targets(OptionId::Maintain, s).d, 5.75);
    // Own center lies to the right, so the right change re-centres and the left change goes one lane over.
    EXPECT_NEAR(targets(OptionId::LaneRight, s).d, 5.25, 1e-12);
    EXPECT_NEAR(targets(OptionId::LaneLeft, s).d, 8.75, 1e-12);
    EXPECT_DOUBLE_EQ(targets(OptionId::LaneLeft, s).v, 20);
}

TEST(Targets, EmergencyClipsZero) {
    const DecisionState free = state_at(20, 5.25);
    const OptionTargets t = targets(OptionId::Emergency, free);
    EXPECT_DOUBLE_EQ(t.v, 20 + free.bounds.dv_lb);
    EXPECT_DOUBLE_EQ(t.d, 5.25);
    EXPECT_LT(t.v, 20);
    EXPECT_DOUBLE_EQ(targets(OptionId::Emergency, state_at(0, 1.75)).v, 0.0);
}

TEST(Initiation, Examples) {
    EXPECT_FALSE(can_initiate(OptionId::LaneLeft, state_at(20, 8.75)));
    EXPECT_FALSE(can_initiate(OptionId::LaneRight, state_at(20, 1.75)));
    EXPECT_TRUE(can_initiate(OptionId::LaneLeft, state_at(20, 1.75)));
    EXPECT_FALSE(can_initiate(OptionId::LaneLeft, state_at(2.9, 1.75)));
    EXPECT_TRUE(can_initiate(OptionId::LaneLeft, state_at(3.0, 1.75)));
    EXPECT_TRUE(can_initiate(OptionId::Maintain, state_at(20, 5.25)));
    EXPECT_FALSE(can_initiate(OptionId::VelIncrease, state_at(36.11, 5.25)));
}

TEST(Termination, PrimitiveOptionsAlwaysTerminate) {
    const DecisionState s = state_at(20, 5.25);
    EXPECT_TRUE(should_terminate(OptionId::Emergency, s));
    EXPECT_TRUE(should_terminate(OptionId::Maintain, s));
    EXPECT_FALSE(should_terminate(OptionId::VelIncrease, s));
    EXPECT_TRUE(should_terminate(OptionId::VelIncrease, state_at(21.995, 5.25)));
    EXPECT_TRUE(should_terminate(OptionId::LaneLeft, state_at(20, 8.75 - 0.049)));
    EXPECT_FALSE(should_terminate(OptionId::LaneLeft, state_at(20, 8.75 - 0.5)));
    EXPECT_TRUE(should_terminate(OptionId::LaneLeft, state_at(2.5, 5.25)));
}

TEST(Options, EmergencyBehindCloseLeader) {
    const DecisionState s = state_at(30, 1.75, {{4.5 + 12.0, 1.75, 15.0}});
    EXPECT_LE(s.bounds.dv_ub, 0.0);
    const OptionMask m = available(s);
    EXPECT_TRUE(m[index_of(OptionId::Emergency)]);
    EXPECT_FALSE(m[index_of(OptionId::VelIncrease)]);
    EXPECT_LT(targets(OptionId::Emergency, s).v, 30);
    EXPECT_LE(option_policy(OptionId::Emergency, s).dv, 0.0);
}

Neighbor random_neighbor(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return {(u(rng) < 0.6 ? 1 : -1) * (5 + 120 * u(rng)), 1.0 + 8.5 * u(rng), 36.11 * u(rng)};
}

DecisionState random_state(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Neighbor> others;
    const int n = int(u(rng) * 6);
    for (int i = 0; i < n; ++i) others.push_back(random_neighbor(rng));
    return state_at(36.11 * u(rng), 1.0 + 8.5 * u(rng), others);
}

TEST(Availability, Properties) {
    std::mt19937_64 rng(8);
    for (int i = 0; i < 3000; ++i) {
        const DecisionState s = random_state(rng);
        const OptionMask all = available(s);
        ASSERT_TRUE(all[index_of(OptionId::Emergency)]);
        for (OptionId o : kAllOptions) {
            ASSERT_EQ(all[index_of(o)], can_initiate(o, s));
            const OptionMask cont = available(s, o);
            if (should_terminate(o, s)) {
                ASSERT_EQ(cont, all);
            } else {
                ASSERT_EQ(cont.count(), 1u);
                ASSERT_TRUE(cont[index_of(o)]);
            }
            // Option policies stay inside the action bounds.
            const ActionRef a = option_policy(o, s);
            ASSERT_GE(a.dv, s.bounds.dv_lb);
            ASSERT_LE(a.dv, s.bounds.dv_ub);
            ASSERT_GE(a.dd, s.bounds.dd_lb);
            ASSERT_LE(a.dd, s.bounds.dd_ub);
        }
    }
}

// Initiation and termination of the non-primitive options are complementary away from the Safe
// predicate: a state either admits starting the option or ends it.
TEST(Availability, InitiationTerminationDuality) {
    std::mt19937_64 rng(12);
    for (int i = 0; i < 3000; ++i) {
        const DecisionState s = random_state(rng);
        for (OptionId o : {OptionId::VelDecrease, OptionId::VelIncrease, OptionId::LaneLeft, OptionId::LaneRight}) {
            const bool close = o == OptionId::VelDecrease || o == OptionId::VelIncrease
                                   ? std::abs(targets(o, s).v - s.scene.v) < 0.01
                                   : std::abs(targets(o, s).d - s.scene.d) < 0.05;
            if (close) continue;
            ASSERT_NE(can_initiate(o, s), should_terminate(o, s)) << name_of(o);
        }
    }
}

TEST(Targets, PureFunctionOfState) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 500; ++i) {
        std::mt19937_64 copy = rng;
        const DecisionState a = random_state(rng), b = random_state(copy);
        for (OptionId o : kAllOptions) {
            ASSERT_EQ(targets(o, a).v, targets(o, b).v);
            ASSERT_EQ(targets(o, a).d, targets(o, b).d);
        }
    }
}

TEST(Axes, SlotsAndNames) {
    EXPECT_EQ(longitudinal_slot(OptionId::VelIncrease), 3);
    EXPECT_EQ(longitudinal_slot(OptionId::LaneLeft), -1);
    EXPECT_EQ(lateral_slot(OptionId::LaneRight), 3);
    EXPECT_EQ(lateral_slot(OptionId::Maintain), 1);
    EXPECT_TRUE(in_longitudinal_set(OptionId::Emergency) && in_lateral_set(OptionId::Emergency));
    EXPECT_EQ(name_of(OptionId::LaneLeft), "lane_left");
}

struct OptionRun {
    bool terminated = false;
    double seconds = 0;
    double first_target = 0;
    double drift = 0;  // largest change of the recomputed target while active
};

// Executes one option on an otherwise empty road until it terminates.
OptionRun execute(HighwayEnv& env, OptionId o, bool lateral) {
    OptionRun r;
    const OptionConstants c;
    r.first_target = lateral ? targets(o, env.decision(), c).d : targets(o, env.decision(), c).v;
    for (int t = 0; t < 300; ++t) {
        if (should_terminate(o, env.decision(), c)) {
            r.terminated = true;
            r.seconds = t * env.config().dt;
            return r;
        }
        const double now = lateral ? targets(o, env.decision(), c).d : targets(o, env.decision(), c).v;
        r.drift = std::max(r.drift, std::abs(now - r.first_target));
        env.step(option_policy(o, env.decision(), c));
    }
    return r;
}

TEST(Options, ScriptedManoeuvresReachTargets) {
    EnvConfig cfg;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        HighwayEnv env(cfg);
        SpawnedVehicle ego;
        const int lane = int(u(rng) * 3);
        const double v = 5 + 28 * u(rng);
        ego.state = make_state({2000 * u(rng), kRoad.lane_center(lane), 0}, v, kRoad);
        ego.driver = Driver::Ego;
        env.reset({ego});

        const OptionId lat = lane == 2 || (lane == 1 && u(rng) < 0.5) ? OptionId::LaneRight : OptionId::LaneLeft;
        ASSERT_TRUE(can_initiate(lat, env.decision()));
        const OptionRun lr = execute(env, lat, true);
        ASSERT_TRUE(lr.terminated) << "case " << i;
        EXPECT_LT(lr.drift, 1e-9) << "lane target moved mid-manoeuvre, case " << i;
        EXPECT_LT(std::abs(env.ego().frame.d - lr.first_target), 0.05);
        EXPECT_LE(lr.seconds, 10.0);

        const OptionId lon = env.ego().v < 30 && u(rng) < 0.5 ? OptionId::VelIncrease : OptionId::VelDecrease;
        ASSERT_TRUE(can_initiate(lon, env.decision()));
        const OptionRun vr = execute(env, lon, false);
        ASSERT_TRUE(vr.terminated) << "case " << i;
        EXPECT_LT(vr.drift, 1e-9);
        EXPECT_LT(std::abs(env.ego().v - vr.first_target), 0.01);
    }
}

}  // namespace
}  // namespace optdrive

#pragma once

#include <cstdint>
#include <vector>

#include "optdrive/road.hpp"
#include "optdrive/safety.hpp"
#include "optdrive/vehicle.hpp"

namespace optdrive {

struct IdmParams {
    double v0 = 33.3;
    double T_headway = 1.5;
    double s0 = 2.0;
    double a = 1.5;
    double b_comf = 2.0;
    double exponent = 4.0;
    double clamp_factor = 3.0;  // strongest braking is b_comf * clamp_factor

    void validate() const;
};

struct MobilParams {
    double politeness = 0.3;
    double a_thresh = 0.1;
    double b_safe = 4.0;
    double bias_right = 0.2;  // m/s^2 added to the threshold for moving left, removed for moving right

    void validate(double b) const;
};

struct RuleParams {
    double T_headway = 1.5;
    double s0 = 2.0;
    double blocked_margin = 1.0;  // m/s below the own target speed that counts as blocked
    double gap_ahead = 40.0;      // m, free space needed ahead in the adjacent lane
    double gap_behind = 20.0;     // m, free space needed behind in the adjacent lane
    double keep_right_gap = 80.0; // m, free space ahead needed before returning right
};

double idm_accel(double gap, double v, double v_lead, const IdmParams& p);

// Nearest leader and follower in one lane, bumper gaps measured from the subject vehicle.
struct LaneNeighbors {
    bool exists = false;
    double lead_gap = kNoLeader;
    double lead_v = 0.0;
    double follow_gap = kNoLeader;
    double follow_v = 0.0;
};

// Neighbours whose footprint reaches into lane `lane`.
LaneNeighbors lane_neighbors(const Scene& scene, int lane, const Road& road);

enum class LaneDecision { Stay, Left, Right };

struct MobilSubject {
    double v = 0.0;
    double length = 4.5;
    IdmParams idm;
};

// idm_others models the unknown followers.
LaneDecision mobil_decide(const MobilSubject& subject, const LaneNeighbors& current, const LaneNeighbors& left,
                          const LaneNeighbors& right, const MobilParams& p, const IdmParams& idm_others);

struct RuleObservation {
    double v = 0.0;
    double v_target = 0.0;
    LaneOffsets lanes;
    LaneNeighbors current;
    LaneNeighbors left;
    LaneNeighbors right;
};

ActionRef rule_based_policy(const RuleObservation& obs, const RuleParams& p);

// Whether moving the subject into `to_lane` keeps the braking criterion with every vehicle reaching
// into that lane or into the lane beyond it.
bool lane_change_clear(const Scene& scene, int from_lane, int to_lane, const Road& road, const SafetyParams& p);

enum class Driver { Ego, IdmMobil, RuleBased };

struct SpawnedVehicle {
    VehicleState state;
    Driver driver = Driver::IdmMobil;
    double target_speed = 0.0;
};

struct SpawnParams {
    double v_max = 36.11;
    double speed_lo = 0.6;   // fraction of v_max
    double speed_hi = 1.0;
    double idm_share = 0.5;  // fraction of traffic driven by IDM/MOBIL
    double spare_gap = 1.0;  // m added on top of the braking-criterion gap
};

// Ego first, then traffic. Gaps between consecutive vehicles in a lane satisfy the braking criterion.
std::vector<SpawnedVehicle> spawn_traffic(const Road& road, double density, std::uint64_t seed,
                                          const SpawnParams& sp, const VehicleParams& vp, const SafetyParams& safety);

}  // namespace optdrive

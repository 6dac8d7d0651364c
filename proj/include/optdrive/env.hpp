#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "optdrive/road.hpp"
#include "optdrive/safety.hpp"
#include "optdrive/traffic.hpp"
#include "optdrive/vehicle.hpp"

namespace optdrive {

inline constexpr int kObsDim = 26;
using Observation = Eigen::Matrix<double, kObsDim, 1>;

struct RewardWeights {
    double follow = 1.0;
    double speed = 1.0;
    double centre = 1.0;
    double right = 1.0;
    double collision_penalty = -5.0;
};

// Penalty components, each in [-1, 0].
struct RewardTerms {
    double follow = 0.0;
    double speed = 0.0;
    double centre = 0.0;
    double right = 0.0;
};

struct EnvConfig {
    Road road = Road::standard();
    VehicleParams vehicle;
    ControllerGains gains;
    SafetyParams safety;
    IdmParams idm;
    MobilParams mobil;
    RuleParams rule;
    SpawnParams spawn;
    RewardWeights weights;
    double reward_headway = 1.5;  // s, following distance below which r_F starts penalising
    double dt = 0.1;
    int max_steps = 5000;
    double obs_range = 150.0;     // m, gap clamp in the observation
    double mobil_cooldown = 5.0;  // s between two MOBIL lane changes of one vehicle
    double obs_speed_scale = 10.0;

    double v_max() const { return spawn.v_max; }
    void validate() const;
};

struct StepResult {
    Observation obs;
    double reward = 0.0;
    RewardTerms terms;
    bool terminated = false;
    bool truncated = false;
    bool ego_in_bounds = true;
};

struct SimVehicle {
    VehicleState state;
    Driver driver = Driver::IdmMobil;
    double target_speed = 0.0;
    int target_lane = 0;
    int origin_lane = 0;
    double cooldown = 0.0;
};

double reward_value(const RewardTerms& t, const RewardWeights& w);

// Scene around vehicle `index` of a fleet.
Scene scene_for(const std::vector<SimVehicle>& fleet, std::size_t index, const EnvConfig& cfg);

// r_F, r_V, r_C and r_R for the subject of a scene.
RewardTerms reward_terms(const Scene& scene, const LaneOffsets& lanes, const EnvConfig& cfg);

// Raw observation (meters, m/s) for the subject of a scene.
Observation observe(const Scene& scene, const LaneOffsets& lanes, double curvature, const EnvConfig& cfg);

// Observation divided by fixed scale constants, roughly in [-1, 1].
Observation normalise(const Observation& raw, const EnvConfig& cfg);

// Oriented rectangle overlap in the road frame (separating axis test).
bool footprints_overlap(double ds, double d_a, double psi_a, double d_b, double psi_b, double length,
                        double width);
bool footprints_overlap(double ds, double d_a, double psi_a, double len_a, double wid_a, double d_b, double psi_b,
                        double len_b, double wid_b);

// Collision flag per vehicle: overlap with any other footprint or leaving the road.
std::vector<bool> collision_check(const std::vector<SimVehicle>& fleet, const EnvConfig& cfg);

// Reference pair produced by the IDM/MOBIL driver for vehicle `index`; updates its lane-change state.
ActionRef idm_mobil_drive(SimVehicle& me, const Scene& scene, const EnvConfig& cfg);
ActionRef rule_drive(const SimVehicle& me, const Scene& scene, const EnvConfig& cfg);

class HighwayEnv {
public:
    explicit HighwayEnv(EnvConfig cfg);

    Observation reset(std::uint64_t seed, double density);
    Observation reset(std::vector<SpawnedVehicle> vehicles);
    StepResult step(const ActionRef& ego_action);

    const EnvConfig& config() const { return cfg_; }
    const DecisionState& decision() const { return decision_; }
    const Observation& observation() const { return obs_; }
    const std::vector<SimVehicle>& fleet() const { return fleet_; }
    const VehicleState& ego() const { return fleet_.front().state; }
    SimVehicle& ego_driver() { return fleet_.front(); }
    int t() const { return t_; }
    bool finished() const { return finished_; }
    int traffic_collisions() const { return traffic_collisions_; }

private:
    void refresh_views();

    EnvConfig cfg_;
    std::vector<SimVehicle> fleet_;
    DecisionState decision_;
    Observation obs_ = Observation::Zero();
    int t_ = 0;
    bool finished_ = true;
    int traffic_collisions_ = 0;
};

}  // namespace optdrive

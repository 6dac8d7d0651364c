#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "optdrive/agents.hpp"

namespace optdrive {

// What happened at one environment step.
struct StepRecord {
    double t = 0.0;  // s, after the step
    double v = 0.0;
    double d = 0.0;
    int lane = 0;
    double c0 = 0.0;        // offset to own lane center after the step
    double lead_gap = 0.0;  // bumper gap to the own-lane leader, obs_range when none
    double reward = 0.0;
    bool collision = false;
    ActionRef action;
    ActionBounds bounds;  // bounds the action was chosen under
    // Active options; -1 where the agent has no such notion.
    int option = -1;
    int o_v = -1;  // slot in kLongitudinalOptions
    int o_d = -1;  // slot in kLateralOptions
};

// How an ego policy labels its decisions.
enum class ActivityKind { None, Single, PerAxis, LateralOnly };
ActivityKind activity_kind(AgentKind k);

struct EpisodeStats {
    double ret = 0.0;
    int steps = 0;
    int collisions = 0;
    int lane_changes = 0;
    double mean_speed = 0.0;
    std::vector<double> lane_change_durations;  // s, from leaving one lane center to reaching the next
    double mean_following = 0.0;  // m, over steps with a leader in range; NaN when never
    double right_lane = 0.0;      // fraction of steps in lane 0
    double centre_dev = 0.0;      // m, mean |c0|
    ActivityKind activity = ActivityKind::None;
    std::array<double, kNumOptions> act{};  // single: fraction of steps each option was active
    std::array<double, kAxisOptions> act_v{};
    std::array<double, kAxisOptions> act_d{};
};

EpisodeStats summarise(const std::vector<StepRecord>& trace, ActivityKind activity, const EnvConfig& cfg,
                       double eps_d = OptionConstants{}.eps_d);

// Decides the ego action at the current state of env.
using EgoPolicy = std::function<Choice(HighwayEnv& env, const StepView& view)>;

// Agent acting with the given exploration. The agent's option memory is reset first.
EgoPolicy agent_policy(Agent& agent, Exploration ex, std::mt19937_64& rng);
// IDM longitudinal control with MOBIL lane changes, clipped to the bounds like the simulated traffic.
EgoPolicy idm_mobil_policy();

// `bounds` are the ones the action was chosen under; env is already past the step.
StepRecord record_step(const HighwayEnv& env, const ActionBounds& bounds, const Choice& c, const StepResult& r,
                       ActivityKind activity);

// Runs one episode from the current env state until it finishes.
std::vector<StepRecord> run_episode(HighwayEnv& env, const EgoPolicy& policy, ActivityKind activity);

}  // namespace optdrive

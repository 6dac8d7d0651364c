#pragma once

#include <array>
#include <bitset>
#include <string_view>

#include "optdrive/safety.hpp"
#include "optdrive/vehicle.hpp"

namespace optdrive {

enum class OptionId { Emergency = 0, Maintain, VelDecrease, VelIncrease, LaneLeft, LaneRight };
enum class Axis { Longitudinal, Lateral, Both };

inline constexpr int kNumOptions = 6;
inline constexpr int kAxisOptions = 4;
inline constexpr std::array<OptionId, kNumOptions> kAllOptions{OptionId::Emergency,   OptionId::Maintain,
                                                               OptionId::VelDecrease, OptionId::VelIncrease,
                                                               OptionId::LaneLeft,    OptionId::LaneRight};
// Per-axis option sets, indexed 0..3 in the combined and hybrid heads.
inline constexpr std::array<OptionId, kAxisOptions> kLongitudinalOptions{
    OptionId::Emergency, OptionId::Maintain, OptionId::VelDecrease, OptionId::VelIncrease};
inline constexpr std::array<OptionId, kAxisOptions> kLateralOptions{OptionId::Emergency, OptionId::Maintain,
                                                                    OptionId::LaneLeft, OptionId::LaneRight};

using OptionMask = std::bitset<kNumOptions>;

constexpr int index_of(OptionId o) { return static_cast<int>(o); }
Axis axis_of(OptionId o);
std::string_view name_of(OptionId o);
bool in_longitudinal_set(OptionId o);
bool in_lateral_set(OptionId o);
int longitudinal_slot(OptionId o);  // position in kLongitudinalOptions, -1 if absent
int lateral_slot(OptionId o);

struct OptionConstants {
    double dv_step = 2.0;      // m/s, velocity lattice spacing
    double eps_v = 0.01;       // m/s
    double eps_d = 0.05;       // m
    double v_min_lane = 3.0;   // m/s, slowest speed for lane changes
};

struct OptionTargets {
    double v = 0.0;
    double d = 0.0;
};

OptionTargets targets(OptionId o, const DecisionState& s, const OptionConstants& c = {});
bool can_initiate(OptionId o, const DecisionState& s, const OptionConstants& c = {});
bool should_terminate(OptionId o, const DecisionState& s, const OptionConstants& c = {});
ActionRef option_policy(OptionId o, const DecisionState& s, const OptionConstants& c = {});

OptionMask available(const DecisionState& s, const OptionConstants& c = {});
OptionMask available(const DecisionState& s, OptionId active, const OptionConstants& c = {});
OptionMask terminations(const DecisionState& s, const OptionConstants& c = {});

}  // namespace optdrive

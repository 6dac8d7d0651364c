#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "optdrive/trainer.hpp"

namespace optdrive {

struct ExperimentConfig {
    std::string agent = "single";  // an AgentKind name or "idm-mobil"
    std::vector<std::uint64_t> seeds{0};
    TrainConfig train;
    std::vector<double> test_densities{0, 5, 10, 15, 20, 30, 40};
    int test_episodes = 10;
    std::string out = "runs";

    void validate() const;
};

// INI text: [experiment], [learner], [exploration], [env], [vehicle], [safety], [reward], [idm], [mobil],
// [rule], [test].
// Unknown sections or keys raise ConfigInvalid.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config(std::ostream& os, const ExperimentConfig& cfg);

// Ego decision maker used outside training: a trained agent without exploration, or IDM/MOBIL.
class EvalPolicy {
public:
    static EvalPolicy idm_mobil();
    static EvalPolicy from_agent(Agent agent);
    // A checkpoint file, or the literal "idm-mobil".
    static EvalPolicy load(const std::string& source);

    std::string name() const;
    bool is_agent() const { return agent_ != nullptr; }
    Agent& agent();
    ActivityKind activity() const;
    std::vector<StepRecord> run(HighwayEnv& env);

private:
    std::shared_ptr<Agent> agent_;
    std::mt19937_64 rng_{0};
};

// Ego at v_max in the rightmost lane, a slower car ahead in the same lane.
struct OvertakingScenario {
    double ego_speed = 36.11;
    double lead_speed = 20.0;
    double lead_gap = 120.0;  // m, center to center
    int steps = 400;
};
std::vector<SpawnedVehicle> overtaking_vehicles(const OvertakingScenario& sc, const EnvConfig& cfg);
std::vector<StepRecord> run_benchmark(EvalPolicy& policy, const OvertakingScenario& sc, EnvConfig cfg);
void write_trace_csv(std::ostream& os, const std::vector<StepRecord>& trace, ActivityKind activity);

struct Summary {
    double mean = 0.0, min = 0.0, max = 0.0;
    int n = 0;
};
Summary summary_of(const std::vector<double>& xs);  // NaN fields when empty

struct DensityResult {
    std::string policy;
    double density = 0.0;
    int episodes = 0;
    Summary ret, speed, lc_duration, following, right_lane, centre_dev;
    int collisions = 0;
    int lane_changes = 0;
};

std::uint64_t test_episode_seed(int density_index, int k);
DensityResult test_density(EvalPolicy& policy, double density, int density_index, int episodes, EnvConfig cfg);
void write_test_csv(std::ostream& os, const std::vector<DensityResult>& rows);

struct ActivityReport {
    ActivityKind kind = ActivityKind::None;
    long steps = 0;
    std::array<double, kNumOptions> single{};
    std::array<double, kAxisOptions> lon{}, lat{};
    double overlap = 0.0;  // combined: fraction of steps with a velocity change and a lane change both active
};
ActivityReport activity_report(EvalPolicy& policy, double density, int episodes, EnvConfig cfg);
void write_activity_csv(std::ostream& os, const ActivityReport& r);

struct RunArtifacts {
    std::filesystem::path dir;
    TrainResult result;
};

// Trains every seed (in parallel), writes metrics, checkpoints and a summary per seed, then picks the best
// checkpoint into <out>/<agent>/best_checkpoint.ckpt.
struct CampaignResult {
    std::vector<RunArtifacts> runs;
    CheckpointId best;
    std::filesystem::path best_checkpoint;
};
CampaignResult run_campaign(const ExperimentConfig& cfg, int threads = 0, std::ostream* log = nullptr);

// Aggregates per-seed metrics files into mean/min/max per (phase, episode).
void write_curve_csv(std::ostream& os, const std::vector<std::filesystem::path>& metrics_files);

}  // namespace optdrive

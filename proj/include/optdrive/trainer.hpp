#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "optdrive/agents.hpp"
#include "optdrive/rollout.hpp"

namespace optdrive {

struct TrainConfig {
    AgentKind kind = AgentKind::Single;
    EnvConfig env;  // env.max_steps is the episode length T
    LearnerParams learner;
    std::uint64_t seed = 0;
    int episodes = 300;
    double density = 10.0;  // vehicles per km
    long warmup = 6400;
    double eps_start = 1.0, eps_end = 0.05;
    double sigma_start = 0.4, sigma_end = 0.05;
    double anneal_fraction = 0.5;
    double replay_ratio = 1.0;  // gradient steps per collected post-warmup step
    std::size_t replay_capacity = 1000000;
    int eval_every = 10;  // episodes
    int eval_episodes = 10;

    ExplorationSchedule schedule() const;
    void validate() const;
};

enum class Phase { Train, Eval };

struct MetricsRow {
    long step = 0;    // environment steps collected so far
    int episode = 0;  // training episodes completed
    Phase phase = Phase::Train;
    EpisodeStats stats;
};

struct Checkpoint {
    int episode = 0;
    double mean_eval_return = 0.0;
    std::string blob;  // serialised agent
};

struct TrainResult {
    std::vector<MetricsRow> rows;
    std::vector<Checkpoint> checkpoints;
    long env_steps = 0;
    long grad_steps = 0;
    int collisions = 0;  // ego collisions over training and evaluation
    int traffic_collisions = 0;
    double wall_seconds = 0.0;
};

// Derives an independent 64-bit seed from a pair.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

// Environment seeds: training episode e (1-based) and evaluation episode k (0-based).
std::uint64_t train_episode_seed(std::uint64_t seed, int episode);
std::uint64_t eval_episode_seed(std::uint64_t seed, int k);

// Evaluates with exploration off over the fixed evaluation scenarios.
std::vector<EpisodeStats> evaluate(Agent& agent, const TrainConfig& cfg, int* traffic_collisions = nullptr);

using ProgressFn = std::function<void(const MetricsRow&)>;
TrainResult train(const TrainConfig& cfg, const ProgressFn& progress = {});

// Versioned CSV; doubles in shortest round-trip form so equal runs give equal bytes.
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
std::vector<std::string> metrics_columns();

struct EvalPoint {
    int episode = 0;
    int total_episodes = 1;
    double mean_return = 0.0;
};

struct CheckpointId {
    std::size_t run = 0;
    std::size_t index = 0;
    bool operator==(const CheckpointId&) const = default;
};

std::vector<EvalPoint> eval_points(const TrainResult& r, int total_episodes);

// Best mean evaluation return among checkpoints taken at or after 2/3 of training;
// ties go to the earliest checkpoint, then the lowest run.
CheckpointId select_best(const std::vector<std::vector<EvalPoint>>& runs);

}  // namespace optdrive

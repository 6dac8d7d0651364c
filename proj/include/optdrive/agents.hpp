#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string_view>
#include <vector>

#include "optdrive/env.hpp"
#include "optdrive/neural.hpp"
#include "optdrive/options.hpp"

namespace optdrive {

// Bit i set: output head i may be selected.
using HeadMask = std::uint32_t;

// First maximum among the allowed heads.
int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& q, HeadMask allowed);
int uniform_pick(HeadMask allowed, std::mt19937_64& rng);

HeadMask option_heads(const OptionMask& m);
HeadMask longitudinal_heads(const OptionMask& m);
HeadMask lateral_heads(const OptionMask& m);

// Intra-option bootstrapping. `q1` picks the next option, the target takes the smaller twin.
int single_next(int o, bool o_terminates, HeadMask avail_next, const Eigen::VectorXd& q1_next);
double single_target(double r, bool terminal, double gamma, int o, bool o_terminates, HeadMask avail_next,
                     const Eigen::VectorXd& q1_next, const Eigen::VectorXd& q2_next);

struct OptionPair {
    int v = 0;
    int d = 0;
    bool operator==(const OptionPair&) const = default;
};

// Heads of the combined critic are indexed v * n_d + d.
OptionPair combined_next(OptionPair cur, bool v_terminates, bool d_terminates, HeadMask avail_v, HeadMask avail_d,
                         const Eigen::VectorXd& q1_next, int n_d);
double combined_target(double r, bool terminal, double gamma, OptionPair cur, bool v_terminates, bool d_terminates,
                       HeadMask avail_v, HeadMask avail_d, const Eigen::VectorXd& q1_next,
                       const Eigen::VectorXd& q2_next, int n_d);

// Inverse-CDF sample of N(mu, sigma^2) restricted to [lo, hi]; sigma = 0 clamps mu.
double truncated_normal(double mu, double sigma, double lo, double hi, std::mt19937_64& rng);
// N(0, sigma^2) clipped to [-c, c].
double clipped_noise(double sigma, double c, std::mt19937_64& rng);

struct Transition {
    Observation s = Observation::Zero();  // normalised
    Observation s_next = Observation::Zero();
    int head = 0;                          // option, option pair or lateral option, by agent kind
    Eigen::Vector2d cont = Eigen::Vector2d::Zero();  // normalised continuous action
    double reward = 0.0;
    bool terminal = false;
    OptionMask avail_now;   // initiable options at s
    OptionMask avail_next;  // initiable options at s_next
    OptionMask term_next;   // options whose termination set contains s_next
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 1000000);
    void push(Transition t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    const Transition& operator[](std::size_t i) const { return data_[i]; }
    // Uniform with replacement.
    std::vector<std::size_t> sample(std::size_t n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> data_;
};

struct ExplorationSchedule {
    long total_steps = 1;
    long warmup = 6400;
    double eps_start = 1.0;
    double eps_end = 0.05;
    double sigma_start = 0.4;
    double sigma_end = 0.05;
    double anneal_fraction = 0.5;

    double eps(long step) const;
    double sigma(long step) const;
    bool random(long step) const { return step < warmup; }
};

struct Exploration {
    double eps = 0.0;
    double sigma = 0.0;
    bool random = false;  // uniform choices and uniform continuous actions
};

enum class AgentKind { Continuous, Single, Combined, Hybrid };

std::string_view name_of(AgentKind k);
AgentKind parse_agent_kind(std::string_view s);
bool uses_options(AgentKind k);

struct LearnerParams {
    double gamma = 0.99;
    int batch = 64;
    double lr_critic = 5e-4;
    double lr_actor = 5e-4;
    double tau = 1e-3;
    int target_stride = 2;
    int actor_stride = 2;
    double sigma_c = 0.2;
    double noise_clip = 0.5;
    double lambda_s = 0.1;
    std::vector<int> critic_hidden{64, 32};
    std::vector<int> actor_hidden{32, 16, 8};

    void validate() const;
};

// What the agent decided for one step.
struct Choice {
    ActionRef action;
    int head = 0;
    Eigen::Vector2d cont = Eigen::Vector2d::Zero();
    OptionId option = OptionId::Maintain;  // single
    OptionId o_v = OptionId::Maintain;     // combined
    OptionId o_d = OptionId::Maintain;     // combined, hybrid
};

// Decision-time view of the environment for an agent.
struct StepView {
    const DecisionState* ds = nullptr;
    Observation obs = Observation::Zero();  // normalised
    OptionMask avail;
    OptionMask term;
};

StepView make_view(const HighwayEnv& env);

struct ActorLoss {
    double value = 0.0;
    ParamSet grad;
};

// -(1/B) sum_b sum_{h in avail_b} q(s_b, mu(s_b))[h] + lambda_s (1/B) sum_b |mu(s'_b) - a_b|^2.
// The critic takes [s; a] and the sum runs over its heads; a single-head critic gives the TD3 loss.
ActorLoss actor_loss(const Mlp& actor, const Mlp& critic, const Eigen::MatrixXd& s, const Eigen::MatrixXd& s_next,
                     const Eigen::MatrixXd& a_taken, const std::vector<HeadMask>& avail, double lambda_s);

class Agent {
public:
    Agent(AgentKind kind, LearnerParams p, std::uint64_t seed);

    AgentKind kind() const { return kind_; }
    const LearnerParams& params() const { return p_; }
    int heads() const;
    int cont_dim() const;

    void begin_episode();
    Choice act(const StepView& view, const Exploration& ex, std::mt19937_64& rng);

    // Bootstrapped target of one stored transition, using the target networks.
    double td_target(const Transition& t, std::mt19937_64& rng) const;
    Eigen::VectorXd td_targets(const std::vector<const Transition*>& batch, std::mt19937_64& rng) const;
    // One gradient step on a uniformly sampled batch.
    void update(const ReplayBuffer& buffer, std::mt19937_64& rng);
    long updates() const { return updates_; }

    Mlp& critic(int i) { return critic_[i]; }
    Mlp& target_critic(int i) { return critic_target_[i]; }
    Mlp& actor() { return actor_; }
    Mlp& target_actor() { return actor_target_; }
    const Mlp& critic(int i) const { return critic_[i]; }
    const Mlp& actor() const { return actor_; }

    void save(std::ostream& os) const;
    static Agent load(std::istream& is);

private:
    Eigen::VectorXd critic_input(const Observation& s, const Eigen::Vector2d& cont) const;
    Eigen::MatrixXd batch_critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const;
    ActionRef compose(const StepView& view, const Choice& c) const;

    AgentKind kind_;
    LearnerParams p_;
    Mlp critic_[2], critic_target_[2];
    Adam critic_opt_[2];
    Mlp actor_, actor_target_;
    Adam actor_opt_;
    long updates_ = 0;

    bool active_ = false;
    Choice last_;
};

}  // namespace optdrive

#include "optdrive/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include "optdrive/errors.hpp"

namespace optdrive {

ExplorationSchedule TrainConfig::schedule() const {
    ExplorationSchedule s;
    s.total_steps = long(episodes) * env.max_steps;
    s.warmup = warmup;
    s.eps_start = eps_start;
    s.eps_end = eps_end;
    s.sigma_start = sigma_start;
    s.sigma_end = sigma_end;
    s.anneal_fraction = anneal_fraction;
    return s;
}

void TrainConfig::validate() const {
    env.validate();
    learner.validate();
    if (episodes < 0) throw ConfigInvalid("episodes must be >= 0");
    if (!(density >= 0)) throw ConfigInvalid("density must be >= 0");
    if (warmup < 0) throw ConfigInvalid("warmup must be >= 0");
    for (double e : {eps_start, eps_end})
        if (!(e >= 0 && e <= 1)) throw ConfigInvalid("epsilon must lie in [0, 1]");
    if (!(sigma_start >= 0) || !(sigma_end >= 0)) throw ConfigInvalid("sigma must be >= 0");
    if (eps_end > eps_start || sigma_end > sigma_start) throw ConfigInvalid("exploration must not increase");
    if (!(anneal_fraction > 0 && anneal_fraction <= 1)) throw ConfigInvalid("anneal_fraction must lie in (0, 1]");
    if (!(replay_ratio >= 0)) throw ConfigInvalid("replay_ratio must be >= 0");
    if (replay_capacity == 0) throw ConfigInvalid("replay_capacity must be positive");
    if (eval_every < 1 || eval_episodes < 1) throw ConfigInvalid("evaluation cadence must be >= 1");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::seed_seq seq{std::uint32_t(a), std::uint32_t(a >> 32), std::uint32_t(b), std::uint32_t(b >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return std::uint64_t(out[0]) << 32 | out[1];
}

std::uint64_t train_episode_seed(std::uint64_t seed, int episode) { return mix_seed(seed, 0x100000000ULL + episode); }
std::uint64_t eval_episode_seed(std::uint64_t seed, int k) { return mix_seed(seed, 0x200000000ULL + k); }

std::vector<EpisodeStats> evaluate(Agent& agent, const TrainConfig& cfg, int* traffic_collisions) {
    std::vector<EpisodeStats> out;
    HighwayEnv env(cfg.env);
    std::mt19937_64 rng(0);  // unused with exploration off
    const ActivityKind act = activity_kind(agent.kind());
    for (int k = 0; k < cfg.eval_episodes; ++k) {
        env.reset(eval_episode_seed(cfg.seed, k), cfg.density);
        const auto trace = run_episode(env, agent_policy(agent, {}, rng), act);
        out.push_back(summarise(trace, act, cfg.env));
        if (traffic_collisions) *traffic_collisions += env.traffic_collisions();
    }
    return out;
}

TrainResult train(const TrainConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res;

    Agent agent(cfg.kind, cfg.learner, mix_seed(cfg.seed, 1));
    std::mt19937_64 act_rng(mix_seed(cfg.seed, 2)), replay_rng(mix_seed(cfg.seed, 3));
    ReplayBuffer buffer(cfg.replay_capacity);
    const ExplorationSchedule sched = cfg.schedule();
    const ActivityKind act = activity_kind(cfg.kind);
    HighwayEnv env(cfg.env);

    auto emit = [&](MetricsRow row) {
        if (progress) progress(row);
        res.rows.push_back(std::move(row));
    };
    auto checkpoint = [&](int episode) {
        const std::vector<EpisodeStats> ev = evaluate(agent, cfg, &res.traffic_collisions);
        double sum = 0;
        for (const EpisodeStats& s : ev) {
            sum += s.ret;
            res.collisions += s.collisions;
            emit({res.env_steps, episode, Phase::Eval, s});
        }
        std::ostringstream os;
        agent.save(os);
        res.checkpoints.push_back({episode, sum / double(ev.size()), os.str()});
    };

    for (int ep = 1; ep <= cfg.episodes; ++ep) {
        env.reset(train_episode_seed(cfg.seed, ep), cfg.density);
        agent.begin_episode();
        std::vector<StepRecord> trace;
        long fresh = 0;
        while (!env.finished()) {
            const StepView view = make_view(env);
            const long step = res.env_steps;
            const Exploration ex{sched.eps(step), sched.sigma(step), sched.random(step)};
            const Choice c = agent.act(view, ex, act_rng);
            const StepResult r = env.step(c.action);
            const StepView next = make_view(env);

            Transition t;
            t.s = view.obs;
            t.s_next = next.obs;
            t.head = c.head;
            t.cont = c.cont;
            t.reward = r.reward;
            t.terminal = r.terminated;  // truncation bootstraps
            t.avail_now = view.avail;
            t.avail_next = next.avail;
            t.term_next = next.term;
            buffer.push(std::move(t));

            trace.push_back(record_step(env, view.ds->bounds, c, r, act));
            if (step >= cfg.warmup) ++fresh;
            ++res.env_steps;
        }
        res.traffic_collisions += env.traffic_collisions();

        const long updates = std::lround(cfg.replay_ratio * double(fresh));
        for (long u = 0; u < updates; ++u) agent.update(buffer, replay_rng);
        res.grad_steps += updates;

        EpisodeStats st = summarise(trace, act, cfg.env);
        res.collisions += st.collisions;
        emit({res.env_steps, ep, Phase::Train, std::move(st)});
        if (ep % cfg.eval_every == 0 || ep == cfg.episodes) checkpoint(ep);
    }
    if (cfg.episodes == 0) checkpoint(0);

    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

namespace {

void put(std::ostream& os, double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    os.write(buf, r.ptr - buf);
}

}  // namespace

std::vector<std::string> metrics_columns() {
    std::vector<std::string> c{"step", "episode", "phase", "return", "collisions", "lane_changes", "mean_speed"};
    for (OptionId o : kAllOptions) c.push_back("act_" + std::string(name_of(o)));
    for (OptionId o : kLongitudinalOptions) c.push_back("v_" + std::string(name_of(o)));
    for (OptionId o : kLateralOptions) c.push_back("d_" + std::string(name_of(o)));
    return c;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
    os << "# optdrive-metrics v1\n";
    const auto cols = metrics_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    for (const MetricsRow& r : rows) {
        const EpisodeStats& s = r.stats;
        os << r.step << ',' << r.episode << ',' << (r.phase == Phase::Train ? "train" : "eval") << ',';
        put(os, s.ret);
        os << ',' << s.collisions << ',' << s.lane_changes << ',';
        put(os, s.mean_speed);
        // Activity columns stay empty where the agent has no such notion.
        const bool single = s.activity == ActivityKind::Single;
        const bool lon = s.activity == ActivityKind::PerAxis;
        const bool lat = lon || s.activity == ActivityKind::LateralOnly;
        for (double a : s.act) {
            os << ',';
            if (single) put(os, a);
        }
        for (double a : s.act_v) {
            os << ',';
            if (lon) put(os, a);
        }
        for (double a : s.act_d) {
            os << ',';
            if (lat) put(os, a);
        }
        os << '\n';
    }
}

std::vector<EvalPoint> eval_points(const TrainResult& r, int total_episodes) {
    std::vector<EvalPoint> out;
    for (const Checkpoint& c : r.checkpoints) out.push_back({c.episode, std::max(total_episodes, 1), c.mean_eval_return});
    return out;
}

CheckpointId select_best(const std::vector<std::vector<EvalPoint>>& runs) {
    bool found = false;
    CheckpointId best;
    const EvalPoint* bp = nullptr;
    // Earlier progress wins ties; compare fractions exactly.
    auto earlier = [](const EvalPoint& a, const EvalPoint& b) {
        return (long long)a.episode * b.total_episodes < (long long)b.episode * a.total_episodes;
    };
    for (std::size_t r = 0; r < runs.size(); ++r)
        for (std::size_t i = 0; i < runs[r].size(); ++i) {
            const EvalPoint& p = runs[r][i];
            if (3LL * p.episode < 2LL * p.total_episodes) continue;
            const bool better = !found || p.mean_return > bp->mean_return ||
                                (p.mean_return == bp->mean_return && earlier(p, *bp));
            if (better) {
                found = true;
                best = {r, i};
                bp = &p;
            }
        }
    if (!found) throw NoEligibleCheckpoint("no evaluation at or after 2/3 of training");
    return best;
}

}  // namespace optdrive

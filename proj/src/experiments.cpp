#include "optdrive/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "optdrive/errors.hpp"

namespace optdrive {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

void put(std::ostream& os, double x) {
    if (std::isfinite(x)) os << fmt(x);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream is(s);
    while (std::getline(is, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

template <class T>
T parse_num(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    T v{};
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc() || r.ptr != t.data() + t.size())
        throw ConfigInvalid("bad value for " + key + ": '" + text + "'");
    return v;
}

template <class T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
    std::vector<T> out;
    for (const std::string& item : split(text, ',')) out.push_back(parse_num<T>(key, item));
    return out;
}

template <class T>
std::string list_text(const std::vector<T>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<T>)
            s += fmt(xs[i]);
        else
            s += std::to_string(xs[i]);
    }
    return s;
}

struct Field {
    std::function<void(const std::string& key, const std::string& text)> set;
    std::function<std::string()> get;
};

using Section = std::vector<std::pair<std::string, Field>>;
using Schema = std::vector<std::pair<std::string, Section>>;

template <class T>
Field num(T& ref) {
    Field f;
    f.set = [&ref](const std::string& k, const std::string& t) { ref = parse_num<T>(k, t); };
    f.get = [&ref] {
        if constexpr (std::is_floating_point_v<T>)
            return fmt(ref);
        else
            return std::to_string(ref);
    };
    return f;
}

template <class T>
Field list(std::vector<T>& ref) {
    return {[&ref](const std::string& k, const std::string& t) { ref = parse_list<T>(k, t); },
            [&ref] { return list_text(ref); }};
}

Field text(std::string& ref) {
    return {[&ref](const std::string&, const std::string& t) { ref = trim(t); }, [&ref] { return ref; }};
}

Schema schema(ExperimentConfig& c) {
    TrainConfig& t = c.train;
    EnvConfig& e = t.env;
    LearnerParams& l = t.learner;
    return {
        {"experiment",
         {{"agent", text(c.agent)},
          {"seeds", list(c.seeds)},
          {"episodes", num(t.episodes)},
          {"steps", num(e.max_steps)},
          {"density", num(t.density)},
          {"out", text(c.out)},
          {"eval_every", num(t.eval_every)},
          {"eval_episodes", num(t.eval_episodes)},
          {"replay_ratio", num(t.replay_ratio)},
          {"replay_capacity", num(t.replay_capacity)}}},
        {"learner",
         {{"gamma", num(l.gamma)},
          {"batch", num(l.batch)},
          {"lr_critic", num(l.lr_critic)},
          {"lr_actor", num(l.lr_actor)},
          {"tau", num(l.tau)},
          {"target_stride", num(l.target_stride)},
          {"actor_stride", num(l.actor_stride)},
          {"sigma_c", num(l.sigma_c)},
          {"noise_clip", num(l.noise_clip)},
          {"lambda_s", num(l.lambda_s)},
          {"critic_hidden", list(l.critic_hidden)},
          {"actor_hidden", list(l.actor_hidden)}}},
        {"exploration",
         {{"warmup", num(t.warmup)},
          {"eps_start", num(t.eps_start)},
          {"eps_end", num(t.eps_end)},
          {"sigma_start", num(t.sigma_start)},
          {"sigma_end", num(t.sigma_end)},
          {"anneal_fraction", num(t.anneal_fraction)}}},
        {"env",
         {{"dt", num(e.dt)},
          {"obs_range", num(e.obs_range)},
          {"obs_speed_scale", num(e.obs_speed_scale)},
          {"reward_headway", num(e.reward_headway)},
          {"mobil_cooldown", num(e.mobil_cooldown)},
          {"v_max", num(e.spawn.v_max)},
          {"speed_lo", num(e.spawn.speed_lo)},
          {"speed_hi", num(e.spawn.speed_hi)},
          {"idm_share", num(e.spawn.idm_share)},
          {"spare_gap", num(e.spawn.spare_gap)}}},
        {"vehicle",
         {{"lf", num(e.vehicle.lf)},
          {"lr", num(e.vehicle.lr)},
          {"length", num(e.vehicle.length)},
          {"width", num(e.vehicle.width)},
          {"a_max", num(e.vehicle.a_max)},
          {"b", num(e.vehicle.b)},
          {"delta_max", num(e.vehicle.delta_max)},
          {"k_v", num(e.gains.k_v)},
          {"lat_speed_max", num(e.gains.lat_speed_max)},
          {"lat_decel", num(e.gains.lat_decel)},
          {"lat_gain", num(e.gains.lat_gain)},
          {"k_heading", num(e.gains.k_heading)},
          {"low_speed_gain", num(e.gains.low_speed_gain)}}},
        {"safety",
         {{"b", num(e.safety.b)},
          {"gap_safe", num(e.safety.gap_safe)},
          {"interp_points", num(e.safety.interp_points)},
          {"reaction_time", num(e.safety.reaction_time)},
          {"lat_margin", num(e.safety.lat_margin)},
          {"edge_margin", num(e.safety.edge_margin)},
          {"lat_lookahead", num(e.safety.lat_lookahead)},
          {"range", num(e.safety.range)}}},
        {"reward",
         {{"follow", num(e.weights.follow)},
          {"speed", num(e.weights.speed)},
          {"centre", num(e.weights.centre)},
          {"right", num(e.weights.right)},
          {"collision_penalty", num(e.weights.collision_penalty)}}},
        {"idm",
         {{"v0", num(e.idm.v0)},
          {"T_headway", num(e.idm.T_headway)},
          {"s0", num(e.idm.s0)},
          {"a", num(e.idm.a)},
          {"b_comf", num(e.idm.b_comf)},
          {"exponent", num(e.idm.exponent)},
          {"clamp_factor", num(e.idm.clamp_factor)}}},
        {"mobil",
         {{"politeness", num(e.mobil.politeness)},
          {"a_thresh", num(e.mobil.a_thresh)},
          {"b_safe", num(e.mobil.b_safe)},
          {"bias_right", num(e.mobil.bias_right)}}},
        {"rule",
         {{"T_headway", num(e.rule.T_headway)},
          {"s0", num(e.rule.s0)},
          {"blocked_margin", num(e.rule.blocked_margin)},
          {"gap_ahead", num(e.rule.gap_ahead)},
          {"gap_behind", num(e.rule.gap_behind)},
          {"keep_right_gap", num(e.rule.keep_right_gap)}}},
        {"test", {{"densities", list(c.test_densities)}, {"episodes", num(c.test_episodes)}}},
    };
}

bool is_idm(const std::string& agent) { return agent == "idm-mobil"; }

}  // namespace

void ExperimentConfig::validate() const {
    if (!is_idm(agent)) parse_agent_kind(agent);
    if (seeds.empty()) throw ConfigInvalid("at least one seed is required");
    if (test_episodes < 1) throw ConfigInvalid("test episodes must be >= 1");
    for (double d : test_densities)
        if (!(d >= 0)) throw ConfigInvalid("test densities must be >= 0");
    if (out.empty()) throw ConfigInvalid("out must not be empty");
    train.validate();
}

ExperimentConfig parse_config(std::istream& is) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigInvalid(e.what());
    }
    ExperimentConfig cfg;
    Schema sch = schema(cfg);
    for (const auto& [sec_name, sec] : tree) {
        const auto s = std::find_if(sch.begin(), sch.end(), [&](const auto& x) { return x.first == sec_name; });
        if (s == sch.end() || sec.empty()) throw ConfigInvalid("unknown section [" + sec_name + "]");
        for (const auto& [key, value] : sec) {
            const auto f = std::find_if(s->second.begin(), s->second.end(), [&](const auto& x) { return x.first == key; });
            if (f == s->second.end()) throw ConfigInvalid("unknown key " + sec_name + "." + key);
            f->second.set(sec_name + "." + key, value.data());
        }
    }
    if (!is_idm(cfg.agent)) cfg.train.kind = parse_agent_kind(cfg.agent);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw ConfigInvalid("cannot open " + path.string());
    return parse_config(f);
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
    ExperimentConfig copy = cfg;
    for (const auto& [name, sec] : schema(copy)) {
        os << '[' << name << "]\n";
        for (const auto& [key, f] : sec) os << key << " = " << f.get() << '\n';
        os << '\n';
    }
}

// ---- evaluation policies

EvalPolicy EvalPolicy::idm_mobil() { return EvalPolicy(); }

EvalPolicy EvalPolicy::from_agent(Agent agent) {
    EvalPolicy p;
    p.agent_ = std::make_shared<Agent>(std::move(agent));
    return p;
}

EvalPolicy EvalPolicy::load(const std::string& source) {
    if (is_idm(source)) return idm_mobil();
    std::ifstream f(source);
    if (!f) throw IncompatibleCheckpoint("cannot open " + source);
    return from_agent(Agent::load(f));
}

std::string EvalPolicy::name() const { return agent_ ? std::string(name_of(agent_->kind())) : "idm-mobil"; }

Agent& EvalPolicy::agent() {
    if (!agent_) throw NotAnOptionAgent("the IDM/MOBIL reference has no learned parameters");
    return *agent_;
}

ActivityKind EvalPolicy::activity() const { return agent_ ? activity_kind(agent_->kind()) : ActivityKind::None; }

std::vector<StepRecord> EvalPolicy::run(HighwayEnv& env) {
    if (!agent_) return run_episode(env, idm_mobil_policy(), ActivityKind::None);
    return run_episode(env, agent_policy(*agent_, {}, rng_), activity());
}

// ---- overtaking benchmark

std::vector<SpawnedVehicle> overtaking_vehicles(const OvertakingScenario& sc, const EnvConfig& cfg) {
    const Road& road = cfg.road;
    SpawnedVehicle ego;
    ego.state = make_state({0.0, road.lane_center(0), 0.0}, sc.ego_speed, road);
    ego.driver = Driver::Ego;
    ego.target_speed = cfg.v_max();
    SpawnedVehicle lead;
    lead.state = make_state({sc.lead_gap, road.lane_center(0), 0.0}, sc.lead_speed, road);
    lead.driver = Driver::IdmMobil;
    lead.target_speed = sc.lead_speed;
    return {ego, lead};
}

std::vector<StepRecord> run_benchmark(EvalPolicy& policy, const OvertakingScenario& sc, EnvConfig cfg) {
    cfg.max_steps = sc.steps;
    HighwayEnv env(cfg);
    env.reset(overtaking_vehicles(sc, cfg));
    return policy.run(env);
}

void write_trace_csv(std::ostream& os, const std::vector<StepRecord>& trace, ActivityKind activity) {
    os << "# optdrive-trace v1\n";
    os << "t,v,d,lane,dv,dd,dv_lb,dv_ub,dd_lb,dd_ub,reward,collision,option,o_v,o_d\n";
    for (const StepRecord& r : trace) {
        os << fmt(r.t) << ',' << fmt(r.v) << ',' << fmt(r.d) << ',' << r.lane << ',' << fmt(r.action.dv) << ','
           << fmt(r.action.dd) << ',' << fmt(r.bounds.dv_lb) << ',' << fmt(r.bounds.dv_ub) << ','
           << fmt(r.bounds.dd_lb) << ',' << fmt(r.bounds.dd_ub) << ',' << fmt(r.reward) << ','
           << (r.collision ? 1 : 0) << ',';
        if (activity == ActivityKind::Single) os << name_of(kAllOptions[std::size_t(r.option)]);
        os << ',';
        if (activity == ActivityKind::PerAxis) os << name_of(kLongitudinalOptions[std::size_t(r.o_v)]);
        os << ',';
        if (activity == ActivityKind::PerAxis || activity == ActivityKind::LateralOnly)
            os << name_of(kLateralOptions[std::size_t(r.o_d)]);
        os << '\n';
    }
}

// ---- density sweep

Summary summary_of(const std::vector<double>& xs) {
    Summary s;
    s.n = int(xs.size());
    if (xs.empty()) {
        s.mean = s.min = s.max = kNaN;
        return s;
    }
    double sum = 0;
    for (double x : xs) sum += x;
    s.mean = sum / double(xs.size());
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    s.min = *lo;
    s.max = *hi;
    return s;
}

std::uint64_t test_episode_seed(int density_index, int k) {
    return mix_seed(0x300000000ULL + std::uint64_t(density_index), std::uint64_t(k));
}

DensityResult test_density(EvalPolicy& policy, double density, int density_index, int episodes, EnvConfig cfg) {
    HighwayEnv env(cfg);
    std::vector<double> ret, speed, lc, follow, right, dev;
    DensityResult res;
    res.policy = policy.name();
    res.density = density;
    res.episodes = episodes;
    for (int k = 0; k < episodes; ++k) {
        env.reset(test_episode_seed(density_index, k), density);
        const EpisodeStats st = summarise(policy.run(env), policy.activity(), cfg);
        ret.push_back(st.ret);
        speed.push_back(st.mean_speed);
        lc.insert(lc.end(), st.lane_change_durations.begin(), st.lane_change_durations.end());
        if (!std::isnan(st.mean_following)) follow.push_back(st.mean_following);
        right.push_back(st.right_lane);
        dev.push_back(st.centre_dev);
        res.collisions += st.collisions;
        res.lane_changes += st.lane_changes;
    }
    res.ret = summary_of(ret);
    res.speed = summary_of(speed);
    res.lc_duration = summary_of(lc);
    res.following = summary_of(follow);
    res.right_lane = summary_of(right);
    res.centre_dev = summary_of(dev);
    return res;
}

void write_test_csv(std::ostream& os, const std::vector<DensityResult>& rows) {
    os << "# optdrive-test v1\npolicy,density,episodes,collisions,lane_changes";
    for (const char* m : {"return", "speed", "lc_duration", "following", "right_lane", "centre_dev"})
        os << ',' << m << "_mean," << m << "_min," << m << "_max";
    os << '\n';
    for (const DensityResult& r : rows) {
        os << r.policy << ',' << fmt(r.density) << ',' << r.episodes << ',' << r.collisions << ',' << r.lane_changes;
        for (const Summary* s : {&r.ret, &r.speed, &r.lc_duration, &r.following, &r.right_lane, &r.centre_dev}) {
            os << ',';
            put(os, s->mean);
            os << ',';
            put(os, s->min);
            os << ',';
            put(os, s->max);
        }
        os << '\n';
    }
}

// ---- option activity

ActivityReport activity_report(EvalPolicy& policy, double density, int episodes, EnvConfig cfg) {
    ActivityReport rep;
    rep.kind = policy.activity();
    if (rep.kind == ActivityKind::None) throw NotAnOptionAgent(policy.name() + " does not use options");
    HighwayEnv env(cfg);
    long both = 0;
    for (int k = 0; k < episodes; ++k) {
        env.reset(test_episode_seed(0, k), density);
        for (const StepRecord& r : policy.run(env)) {
            ++rep.steps;
            if (r.option >= 0) rep.single[std::size_t(r.option)] += 1;
            if (r.o_v >= 0) rep.lon[std::size_t(r.o_v)] += 1;
            if (r.o_d >= 0) rep.lat[std::size_t(r.o_d)] += 1;
            // Slots 2 and 3 are the manoeuvres on both axes.
            if (r.o_v >= 2 && r.o_d >= 2) ++both;
        }
    }
    const double n = double(std::max(rep.steps, 1L));
    for (double& a : rep.single) a /= n;
    for (double& a : rep.lon) a /= n;
    for (double& a : rep.lat) a /= n;
    rep.overlap = double(both) / n;
    return rep;
}

void write_activity_csv(std::ostream& os, const ActivityReport& r) {
    os << "# optdrive-activity v1\naxis,option,fraction\n";
    auto row = [&](const char* axis, std::string_view opt, double x) {
        os << axis << ',' << opt << ',' << fmt(x) << '\n';
    };
    switch (r.kind) {
        case ActivityKind::None: break;
        case ActivityKind::Single:
            for (std::size_t i = 0; i < kNumOptions; ++i) row("single", name_of(kAllOptions[i]), r.single[i]);
            break;
        case ActivityKind::PerAxis:
            for (std::size_t i = 0; i < kAxisOptions; ++i) row("longitudinal", name_of(kLongitudinalOptions[i]), r.lon[i]);
            for (std::size_t i = 0; i < kAxisOptions; ++i) row("lateral", name_of(kLateralOptions[i]), r.lat[i]);
            row("both", "overlap", r.overlap);
            break;
        case ActivityKind::LateralOnly:
            for (std::size_t i = 0; i < kAxisOptions; ++i) row("lateral", name_of(kLateralOptions[i]), r.lat[i]);
            break;
    }
}

// ---- training campaign

CampaignResult run_campaign(const ExperimentConfig& cfg, int threads, std::ostream* log) {
    cfg.validate();
    if (is_idm(cfg.agent)) throw ConfigInvalid("idm-mobil is a fixed reference and cannot be trained");
    const fs::path root = fs::path(cfg.out) / cfg.agent;
    fs::create_directories(root);
    {
        std::ofstream f(root / "config.ini");
        write_config(f, cfg);
    }

    CampaignResult out;
    out.runs.resize(cfg.seeds.size());
    std::mutex log_mu;
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;

    auto work = [&] {
        for (std::size_t i; (i = next++) < cfg.seeds.size();) {
            try {
                TrainConfig tc = cfg.train;
                tc.kind = parse_agent_kind(cfg.agent);
                tc.seed = cfg.seeds[i];
                const fs::path dir = root / ("seed_" + std::to_string(tc.seed));
                fs::create_directories(dir / "checkpoints");
                TrainResult res = train(tc, [&](const MetricsRow& row) {
                    if (!log || row.phase != Phase::Train) return;
                    std::lock_guard lk(log_mu);
                    *log << cfg.agent << " seed " << tc.seed << " episode " << row.episode << " return "
                         << fmt(row.stats.ret) << '\n';
                });
                std::ofstream(dir / "metrics.csv") << [&] {
                    std::ostringstream os;
                    write_metrics_csv(os, res.rows);
                    return os.str();
                }();
                for (const Checkpoint& c : res.checkpoints)
                    std::ofstream(dir / "checkpoints" / ("ep_" + std::to_string(c.episode) + ".ckpt")) << c.blob;
                std::ofstream summary(dir / "summary.txt");
                summary << "agent = " << cfg.agent << "\nseed = " << tc.seed << "\nenv_steps = " << res.env_steps
                        << "\ngrad_steps = " << res.grad_steps << "\ncollisions = " << res.collisions
                        << "\ntraffic_collisions = " << res.traffic_collisions
                        << "\nwall_seconds = " << fmt(res.wall_seconds) << '\n';
                out.runs[i] = {dir, std::move(res)};
            } catch (...) {
                std::lock_guard lk(log_mu);
                if (!failure) failure = std::current_exception();
            }
        }
    };

    int n = threads > 0 ? threads : int(std::max(1u, std::thread::hardware_concurrency()));
    n = std::min<int>(n, int(cfg.seeds.size()));
    if (n <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int k = 0; k < n; ++k) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<std::vector<EvalPoint>> pts;
    for (const RunArtifacts& r : out.runs) pts.push_back(eval_points(r.result, cfg.train.episodes));
    out.best = select_best(pts);
    const Checkpoint& bc = out.runs[out.best.run].result.checkpoints[out.best.index];
    out.best_checkpoint = root / "best_checkpoint.ckpt";
    std::ofstream(out.best_checkpoint) << bc.blob;
    std::ofstream(root / "best.txt") << "seed = " << cfg.seeds[out.best.run] << "\nepisode = " << bc.episode
                                     << "\nmean_eval_return = " << fmt(bc.mean_eval_return) << '\n';
    return out;
}

// ---- learning curves

void write_curve_csv(std::ostream& os, const std::vector<fs::path>& files) {
    // (phase, episode) -> per-file mean return
    std::map<std::pair<std::string, int>, std::vector<double>> points;
    for (const fs::path& p : files) {
        std::ifstream f(p);
        if (!f) throw ConfigInvalid("cannot open " + p.string());
        std::string line;
        std::vector<std::string> header;
        std::map<std::pair<std::string, int>, std::pair<double, int>> local;
        while (std::getline(f, line)) {
            if (line.empty() || line[0] == '#') continue;
            const auto cells = split(line, ',');
            if (header.empty()) {
                header = cells;
                continue;
            }
            auto col = [&](const char* name) -> const std::string& {
                const auto it = std::find(header.begin(), header.end(), name);
                if (it == header.end() || std::size_t(it - header.begin()) >= cells.size())
                    throw ConfigInvalid(p.string() + ": missing column " + name);
                return cells[std::size_t(it - header.begin())];
            };
            auto& acc = local[{col("phase"), parse_num<int>("episode", col("episode"))}];
            acc.first += parse_num<double>("return", col("return"));
            acc.second += 1;
        }
        for (const auto& [k, v] : local) points[k].push_back(v.first / v.second);
    }
    os << "# optdrive-curve v1\nphase,episode,runs,return_mean,return_min,return_max\n";
    for (const auto& [k, xs] : points) {
        const Summary s = summary_of(xs);
        os << k.first << ',' << k.second << ',' << s.n << ',' << fmt(s.mean) << ',' << fmt(s.min) << ','
           << fmt(s.max) << '\n';
    }
}

}  // namespace optdrive

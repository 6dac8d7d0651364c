#include "optdrive/agents.hpp"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "optdrive/errors.hpp"

namespace optdrive {

int masked_argmax(const Eigen::Ref<const Eigen::VectorXd>& q, HeadMask allowed) {
    int best = -1;
    for (int i = 0; i < int(q.size()); ++i) {
        if (!(allowed >> i & 1u)) continue;
        if (best < 0 || q[i] > q[best]) best = i;
    }
    if (best < 0) throw ShapeMismatch("masked_argmax: no head allowed");
    return best;
}

int uniform_pick(HeadMask allowed, std::mt19937_64& rng) {
    std::vector<int> idx;
    for (int i = 0; i < 32; ++i)
        if (allowed >> i & 1u) idx.push_back(i);
    if (idx.empty()) throw ShapeMismatch("uniform_pick: empty mask");
    return idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)];
}

HeadMask option_heads(const OptionMask& m) { return HeadMask(m.to_ulong()); }

HeadMask longitudinal_heads(const OptionMask& m) {
    HeadMask h = 0;
    for (int i = 0; i < kAxisOptions; ++i)
        if (m[index_of(kLongitudinalOptions[i])]) h |= 1u << i;
    return h;
}

HeadMask lateral_heads(const OptionMask& m) {
    HeadMask h = 0;
    for (int i = 0; i < kAxisOptions; ++i)
        if (m[index_of(kLateralOptions[i])]) h |= 1u << i;
    return h;
}

int single_next(int o, bool o_terminates, HeadMask avail_next, const Eigen::VectorXd& q1_next) {
    return o_terminates ? masked_argmax(q1_next, avail_next) : o;
}

double single_target(double r, bool terminal, double gamma, int o, bool o_terminates, HeadMask avail_next,
                     const Eigen::VectorXd& q1_next, const Eigen::VectorXd& q2_next) {
    if (terminal) return r;
    const int n = single_next(o, o_terminates, avail_next, q1_next);
    return r + gamma * std::min(q1_next[n], q2_next[n]);
}

OptionPair combined_next(OptionPair cur, bool v_terminates, bool d_terminates, HeadMask avail_v, HeadMask avail_d,
                         const Eigen::VectorXd& q1_next, int n_d) {
    if (v_terminates && d_terminates) {
        HeadMask joint = 0;
        const int n_v = int(q1_next.size()) / n_d;
        for (int v = 0; v < n_v; ++v)
            for (int d = 0; d < n_d; ++d)
                if ((avail_v >> v & 1u) && (avail_d >> d & 1u)) joint |= 1u << (v * n_d + d);
        const int h = masked_argmax(q1_next, joint);
        return {h / n_d, h % n_d};
    }
    if (v_terminates) {
        HeadMask col = 0;
        for (int v = 0; v * n_d < int(q1_next.size()); ++v)
            if (avail_v >> v & 1u) col |= 1u << (v * n_d + cur.d);
        return {masked_argmax(q1_next, col) / n_d, cur.d};
    }
    if (d_terminates) {
        HeadMask row = 0;
        for (int d = 0; d < n_d; ++d)
            if (avail_d >> d & 1u) row |= 1u << (cur.v * n_d + d);
        return {cur.v, masked_argmax(q1_next, row) % n_d};
    }
    return cur;
}

double combined_target(double r, bool terminal, double gamma, OptionPair cur, bool v_terminates, bool d_terminates,
                       HeadMask avail_v, HeadMask avail_d, const Eigen::VectorXd& q1_next,
                       const Eigen::VectorXd& q2_next, int n_d) {
    if (terminal) return r;
    const OptionPair n = combined_next(cur, v_terminates, d_terminates, avail_v, avail_d, q1_next, n_d);
    const int h = n.v * n_d + n.d;
    return r + gamma * std::min(q1_next[h], q2_next[h]);
}

double truncated_normal(double mu, double sigma, double lo, double hi, std::mt19937_64& rng) {
    if (!(sigma > 0)) return std::clamp(mu, lo, hi);
    double a = (lo - mu) / sigma, b = (hi - mu) / sigma;
    // Work in the lower tail, where the CDF keeps its relative precision.
    const bool flip = a > 0;
    if (flip) {
        std::swap(a, b);
        a = -a;
        b = -b;
    }
    static const boost::math::normal_distribution<double> n01;
    const double pa = boost::math::cdf(n01, a), pb = boost::math::cdf(n01, b);
    const double u = pa + std::uniform_real_distribution<double>(0.0, 1.0)(rng) * (pb - pa);
    double z;
    if (!(u > 0))
        z = a;
    else if (!(u < 1))
        z = b;
    else
        z = std::clamp(boost::math::quantile(n01, u), a, b);
    if (flip) z = -z;
    return std::clamp(mu + sigma * z, lo, hi);
}

double clipped_noise(double sigma, double c, std::mt19937_64& rng) {
    if (!(sigma > 0)) return 0.0;
    return std::clamp(std::normal_distribution<double>(0.0, sigma)(rng), -c, c);
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigInvalid("replay capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
    } else {
        data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<std::size_t> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
    if (data_.empty()) throw EmptyBatch("sampling from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<std::size_t> out(n);
    for (auto& i : out) i = pick(rng);
    return out;
}

namespace {

double anneal(long step, long total, double fraction, double from, double to) {
    const double span = fraction * double(total);
    const double f = span > 0 ? std::min(1.0, std::max(0.0, double(step) / span)) : 1.0;
    return from + f * (to - from);
}

}  // namespace

double ExplorationSchedule::eps(long step) const {
    return anneal(step, total_steps, anneal_fraction, eps_start, eps_end);
}

double ExplorationSchedule::sigma(long step) const {
    return anneal(step, total_steps, anneal_fraction, sigma_start, sigma_end);
}

std::string_view name_of(AgentKind k) {
    switch (k) {
        case AgentKind::Continuous: return "continuous";
        case AgentKind::Single: return "single";
        case AgentKind::Combined: return "combined";
        case AgentKind::Hybrid: return "hybrid";
    }
    return "?";
}

AgentKind parse_agent_kind(std::string_view s) {
    for (AgentKind k : {AgentKind::Continuous, AgentKind::Single, AgentKind::Combined, AgentKind::Hybrid})
        if (name_of(k) == s) return k;
    throw ConfigInvalid("unknown agent kind '" + std::string(s) + "'");
}

bool uses_options(AgentKind k) { return k != AgentKind::Continuous; }

void LearnerParams::validate() const {
    if (!(gamma >= 0 && gamma <= 1)) throw ConfigInvalid("gamma must lie in [0, 1]");
    if (batch < 1) throw ConfigInvalid("batch must be >= 1");
    if (!(lr_critic > 0) || !(lr_actor > 0)) throw ConfigInvalid("learning rates must be positive");
    if (!(tau > 0 && tau <= 1)) throw ConfigInvalid("tau must lie in (0, 1]");
    if (target_stride < 1 || actor_stride < 1) throw ConfigInvalid("strides must be >= 1");
    if (sigma_c < 0 || noise_clip < 0 || lambda_s < 0) throw ConfigInvalid("noise and regulariser must be >= 0");
    for (int h : critic_hidden)
        if (h < 1) throw ConfigInvalid("critic widths must be >= 1");
    for (int h : actor_hidden)
        if (h < 1) throw ConfigInvalid("actor widths must be >= 1");
}

StepView make_view(const HighwayEnv& env) {
    StepView v;
    v.ds = &env.decision();
    v.obs = normalise(env.observation(), env.config());
    v.avail = available(env.decision());
    v.term = terminations(env.decision());
    return v;
}

namespace {

void add_into(ParamSet& acc, const ParamSet& g) {
    for (std::size_t l = 0; l < acc.W.size(); ++l) {
        acc.W[l] += g.W[l];
        acc.b[l] += g.b[l];
    }
}

}  // namespace

ActorLoss actor_loss(const Mlp& actor, const Mlp& critic, const Eigen::MatrixXd& s, const Eigen::MatrixXd& s_next,
                     const Eigen::MatrixXd& a_taken, const std::vector<HeadMask>& avail, double lambda_s) {
    const Eigen::Index B = s.cols();
    if (B == 0) throw EmptyBatch("actor loss on an empty batch");
    if (s_next.cols() != B || a_taken.cols() != B || Eigen::Index(avail.size()) != B)
        throw ShapeMismatch("actor loss batch sizes differ");
    const int adim = actor.spec().output_dim;
    const int sdim = actor.spec().input_dim;
    if (critic.spec().input_dim != sdim + adim) throw ShapeMismatch("critic does not take [s; a]");

    Mlp::Tape ta, tc, tn;
    const Eigen::MatrixXd mu = actor.forward(s, ta);
    Eigen::MatrixXd x(sdim + adim, B);
    x.topRows(sdim) = s;
    x.bottomRows(adim) = mu;
    const Eigen::MatrixXd q = critic.forward(x, tc);

    ActorLoss out;
    Eigen::MatrixXd up = Eigen::MatrixXd::Zero(q.rows(), B);
    for (Eigen::Index j = 0; j < B; ++j)
        for (Eigen::Index h = 0; h < q.rows(); ++h)
            if (avail[j] >> h & 1u) {
                out.value -= q(h, j) / double(B);
                up(h, j) = -1.0 / double(B);
            }
    Eigen::MatrixXd gx;
    critic.backward(tc, up, &gx);
    out.grad = actor.backward(ta, gx.bottomRows(adim));

    if (lambda_s > 0) {
        const Eigen::MatrixXd diff = actor.forward(s_next, tn) - a_taken;
        out.value += lambda_s * diff.squaredNorm() / double(B);
        add_into(out.grad, actor.backward(tn, 2.0 * lambda_s / double(B) * diff));
    }
    return out;
}

namespace {

constexpr int kHybridHeads = kAxisOptions;
constexpr int kCombinedHeads = kAxisOptions * kAxisOptions;

MlpSpec critic_for(AgentKind k, const LearnerParams& p) {
    switch (k) {
        case AgentKind::Continuous: return critic_spec(CriticLayout::Continuous, kObsDim, 2, 1, p.critic_hidden);
        case AgentKind::Single: return critic_spec(CriticLayout::Discrete, kObsDim, 0, kNumOptions, p.critic_hidden);
        case AgentKind::Combined:
            return critic_spec(CriticLayout::Discrete, kObsDim, 0, kCombinedHeads, p.critic_hidden);
        case AgentKind::Hybrid: return critic_spec(CriticLayout::Hybrid, kObsDim, 1, kHybridHeads, p.critic_hidden);
    }
    throw ConfigInvalid("unknown agent kind");
}

bool has_actor(AgentKind k) { return k == AgentKind::Continuous || k == AgentKind::Hybrid; }

}  // namespace

Agent::Agent(AgentKind kind, LearnerParams p, std::uint64_t seed) : kind_(kind), p_(std::move(p)) {
    p_.validate();
    std::mt19937_64 rng(seed);
    const MlpSpec cs = critic_for(kind_, p_);
    for (int i = 0; i < 2; ++i) {
        critic_[i] = Mlp(cs, rng);
        critic_target_[i] = critic_[i];
        critic_opt_[i] = Adam(critic_[i].params(), {p_.lr_critic});
    }
    if (has_actor(kind_)) {
        actor_ = Mlp(actor_spec(kObsDim, cont_dim(), p_.actor_hidden), rng);
        actor_target_ = actor_;
        actor_opt_ = Adam(actor_.params(), {p_.lr_actor});
    }
}

int Agent::heads() const { return critic_[0].spec().output_dim; }

int Agent::cont_dim() const {
    switch (kind_) {
        case AgentKind::Continuous: return 2;
        case AgentKind::Hybrid: return 1;
        default: return 0;
    }
}

void Agent::begin_episode() { active_ = false; }

Eigen::VectorXd Agent::critic_input(const Observation& s, const Eigen::Vector2d& cont) const {
    const int c = kind_ == AgentKind::Continuous ? 2 : kind_ == AgentKind::Hybrid ? 1 : 0;
    Eigen::VectorXd x(kObsDim + c);
    x.head(kObsDim) = s;
    x.tail(c) = cont.head(c);
    return x;
}

Eigen::MatrixXd Agent::batch_critic_input(const Eigen::MatrixXd& s, const Eigen::MatrixXd& a) const {
    Eigen::MatrixXd x(s.rows() + a.rows(), s.cols());
    x.topRows(s.rows()) = s;
    x.bottomRows(a.rows()) = a;
    return x;
}

ActionRef Agent::compose(const StepView& view, const Choice& c) const {
    const DecisionState& ds = *view.ds;
    const ActionBounds& b = ds.bounds;
    switch (kind_) {
        case AgentKind::Continuous: return {pwl_rescale(c.cont[0], b.dv_lb, b.dv_ub), pwl_rescale(c.cont[1], b.dd_lb, b.dd_ub)};
        case AgentKind::Single: return option_policy(c.option, ds);
        case AgentKind::Combined: return {option_policy(c.o_v, ds).dv, option_policy(c.o_d, ds).dd};
        case AgentKind::Hybrid: return {pwl_rescale(c.cont[0], b.dv_lb, b.dv_ub), option_policy(c.o_d, ds).dd};
    }
    return {};
}

Choice Agent::act(const StepView& view, const Exploration& ex, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    // Uniform choice with probability eps, or always during warmup.
    auto explore = [&] { return ex.random || (ex.eps > 0 && unit(rng) < ex.eps); };

    Choice c = last_;
    switch (kind_) {
        case AgentKind::Continuous: {
            if (ex.random) {
                c.cont = {sym(rng), sym(rng)};
            } else {
                const Eigen::VectorXd mu = actor_.forward_one(view.obs);
                for (int i = 0; i < 2; ++i) c.cont[i] = truncated_normal(mu[i], ex.sigma, -1.0, 1.0, rng);
            }
            break;
        }
        case AgentKind::Single: {
            if (!active_ || view.term[index_of(c.option)]) {
                const HeadMask m = option_heads(view.avail);
                c.head = explore() ? uniform_pick(m, rng) : masked_argmax(critic_[0].forward_one(view.obs), m);
                c.option = static_cast<OptionId>(c.head);
            }
            break;
        }
        case AgentKind::Combined: {
            const bool tv = !active_ || view.term[index_of(c.o_v)];
            const bool td = !active_ || view.term[index_of(c.o_d)];
            const HeadMask av = longitudinal_heads(view.avail), ad = lateral_heads(view.avail);
            OptionPair pair{longitudinal_slot(c.o_v), lateral_slot(c.o_d)};
            if (tv || td) {
                if (explore()) {
                    if (tv) pair.v = uniform_pick(av, rng);
                    if (td) pair.d = uniform_pick(ad, rng);
                } else {
                    pair = combined_next(pair, tv, td, av, ad, critic_[0].forward_one(view.obs), kAxisOptions);
                }
            }
            c.o_v = kLongitudinalOptions[pair.v];
            c.o_d = kLateralOptions[pair.d];
            c.head = pair.v * kAxisOptions + pair.d;
            break;
        }
        case AgentKind::Hybrid: {
            if (ex.random) {
                c.cont = {sym(rng), 0.0};
            } else {
                const double mu = actor_.forward_one(view.obs)[0];
                c.cont = {truncated_normal(mu, ex.sigma, -1.0, 1.0, rng), 0.0};
            }
            if (!active_ || view.term[index_of(c.o_d)]) {
                const HeadMask m = lateral_heads(view.avail);
                c.head = explore() ? uniform_pick(m, rng)
                                   : masked_argmax(critic_[0].forward_one(critic_input(view.obs, c.cont)), m);
                c.o_d = kLateralOptions[c.head];
            }
            break;
        }
    }
    c.action = compose(view, c);
    active_ = true;
    last_ = c;
    return c;
}

double Agent::td_target(const Transition& t, std::mt19937_64& rng) const { return td_targets({&t}, rng)[0]; }

Eigen::VectorXd Agent::td_targets(const std::vector<const Transition*>& batch, std::mt19937_64& rng) const {
    const Eigen::Index B = Eigen::Index(batch.size());
    Eigen::MatrixXd s_next(kObsDim, B);
    for (Eigen::Index j = 0; j < B; ++j) s_next.col(j) = batch[j]->s_next;

    Eigen::MatrixXd x = s_next;
    if (has_actor(kind_)) {
        // Target policy smoothing: a' = clamp(mu'(s') + clip(noise), -1, 1).
        Eigen::MatrixXd a = actor_target_.forward(s_next);
        for (Eigen::Index j = 0; j < B; ++j) {
            if (batch[j]->terminal) continue;
            for (Eigen::Index i = 0; i < a.rows(); ++i)
                a(i, j) = std::clamp(a(i, j) + clipped_noise(p_.sigma_c, p_.noise_clip, rng), -1.0, 1.0);
        }
        x = batch_critic_input(s_next, a);
    }
    const Eigen::MatrixXd q1 = critic_target_[0].forward(x), q2 = critic_target_[1].forward(x);

    Eigen::VectorXd y(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const Transition& t = *batch[j];
        if (t.terminal) {
            y[j] = t.reward;
            continue;
        }
        const Eigen::VectorXd c1 = q1.col(j), c2 = q2.col(j);
        switch (kind_) {
            case AgentKind::Continuous: y[j] = t.reward + p_.gamma * std::min(c1[0], c2[0]); break;
            case AgentKind::Single:
                y[j] = single_target(t.reward, false, p_.gamma, t.head, t.term_next[t.head], option_heads(t.avail_next),
                                     c1, c2);
                break;
            case AgentKind::Combined: {
                const OptionPair cur{t.head / kAxisOptions, t.head % kAxisOptions};
                y[j] = combined_target(t.reward, false, p_.gamma, cur, t.term_next[index_of(kLongitudinalOptions[cur.v])],
                                       t.term_next[index_of(kLateralOptions[cur.d])], longitudinal_heads(t.avail_next),
                                       lateral_heads(t.avail_next), c1, c2, kAxisOptions);
                break;
            }
            case AgentKind::Hybrid:
                y[j] = single_target(t.reward, false, p_.gamma, t.head, t.term_next[index_of(kLateralOptions[t.head])],
                                     lateral_heads(t.avail_next), c1, c2);
                break;
        }
    }
    return y;
}

void Agent::update(const ReplayBuffer& buffer, std::mt19937_64& rng) {
    const std::vector<std::size_t> idx = buffer.sample(std::size_t(p_.batch), rng);
    const Eigen::Index B = Eigen::Index(idx.size());
    const int c = cont_dim();

    Eigen::MatrixXd s(kObsDim, B), s_next(kObsDim, B), a(c, B);
    std::vector<const Transition*> batch(idx.size());
    std::vector<HeadMask> avail(B);
    for (Eigen::Index j = 0; j < B; ++j) {
        const Transition& t = buffer[idx[j]];
        batch[j] = &t;
        s.col(j) = t.s;
        s_next.col(j) = t.s_next;
        a.col(j) = t.cont.head(c);
        avail[j] = kind_ == AgentKind::Hybrid ? lateral_heads(t.avail_now) : 1u;
    }
    const Eigen::VectorXd y = td_targets(batch, rng);

    const Eigen::MatrixXd x = c > 0 ? batch_critic_input(s, a) : s;
    for (int i = 0; i < 2; ++i) {
        Mlp::Tape tape;
        const Eigen::MatrixXd q = critic_[i].forward(x, tape);
        Eigen::MatrixXd up = Eigen::MatrixXd::Zero(q.rows(), B);
        for (Eigen::Index j = 0; j < B; ++j) {
            const int h = kind_ == AgentKind::Continuous ? 0 : buffer[idx[j]].head;
            up(h, j) = 2.0 * (q(h, j) - y[j]) / double(B);
        }
        const ParamSet g = critic_[i].backward(tape, up);
        if (!g.all_finite()) throw NonFiniteGradient("critic gradient");
        critic_opt_[i].step(critic_[i].params(), g);
    }

    ++updates_;
    if (has_actor(kind_) && updates_ % p_.actor_stride == 0) {
        const ActorLoss l = actor_loss(actor_, critic_[0], s, s_next, a, avail, p_.lambda_s);
        if (!l.grad.all_finite()) throw NonFiniteGradient("actor gradient");
        actor_opt_.step(actor_.params(), l.grad);
    }
    if (updates_ % p_.target_stride == 0) {
        for (int i = 0; i < 2; ++i) polyak_update(critic_target_[i].params(), critic_[i].params(), p_.tau);
        if (has_actor(kind_)) polyak_update(actor_target_.params(), actor_.params(), p_.tau);
    }
}

void Agent::save(std::ostream& os) const {
    os << "optdrive-agent 1\n" << name_of(kind_) << '\n';
    for (int i = 0; i < 2; ++i) save_mlp(os, critic_[i]);
    for (int i = 0; i < 2; ++i) save_mlp(os, critic_target_[i]);
    if (has_actor(kind_)) {
        save_mlp(os, actor_);
        save_mlp(os, actor_target_);
    }
}

Agent Agent::load(std::istream& is) {
    std::string magic, version, kind_name;
    if (!(is >> magic >> version >> kind_name) || magic != "optdrive-agent" || version != "1")
        throw IncompatibleCheckpoint("not an agent checkpoint");
    AgentKind kind;
    try {
        kind = parse_agent_kind(kind_name);
    } catch (const ConfigInvalid&) {
        throw IncompatibleCheckpoint("unknown agent kind '" + kind_name + "'");
    }
    Mlp nets[6];
    const int n = has_actor(kind) ? 6 : 4;
    for (int i = 0; i < n; ++i) nets[i] = load_mlp(is);

    LearnerParams p;
    p.critic_hidden = nets[0].spec().hidden;
    if (has_actor(kind)) p.actor_hidden = nets[4].spec().hidden;
    Agent agent(kind, p, 0);
    for (int i = 0; i < 2; ++i) {
        if (!(nets[i].spec() == agent.critic_[i].spec()) || !(nets[2 + i].spec() == agent.critic_[i].spec()))
            throw IncompatibleCheckpoint("critic layout does not match the agent kind");
        agent.critic_[i] = nets[i];
        agent.critic_target_[i] = nets[2 + i];
        agent.critic_opt_[i] = Adam(nets[i].params(), {p.lr_critic});
    }
    if (has_actor(kind)) {
        if (!(nets[4].spec() == agent.actor_.spec()) || !(nets[5].spec() == agent.actor_.spec()))
            throw IncompatibleCheckpoint("actor layout does not match the agent kind");
        agent.actor_ = nets[4];
        agent.actor_target_ = nets[5];
        agent.actor_opt_ = Adam(nets[4].params(), {p.lr_actor});
    }
    return agent;
}

}  // namespace optdrive

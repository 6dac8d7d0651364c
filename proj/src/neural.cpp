#include "optdrive/neural.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <string>

#include "optdrive/errors.hpp"

namespace optdrive {

void MlpSpec::validate() const {
    if (input_dim < 1 || output_dim < 1) throw ShapeMismatch("network dimensions must be >= 1");
    for (int h : hidden)
        if (h < 1) throw ShapeMismatch("hidden widths must be >= 1");
}

ParamSet ParamSet::zeros_like(const ParamSet& p) {
    ParamSet z;
    for (const auto& w : p.W) z.W.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    for (const auto& b : p.b) z.b.push_back(Eigen::VectorXd::Zero(b.size()));
    return z;
}

Eigen::Index ParamSet::size() const {
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
    return n;
}

bool ParamSet::all_finite() const {
    for (std::size_t l = 0; l < W.size(); ++l)
        if (!W[l].allFinite() || !b[l].allFinite()) return false;
    return true;
}

bool ParamSet::same_shape(const ParamSet& o) const {
    if (W.size() != o.W.size() || b.size() != o.b.size()) return false;
    for (std::size_t l = 0; l < W.size(); ++l)
        if (W[l].rows() != o.W[l].rows() || W[l].cols() != o.W[l].cols() || b[l].size() != o.b[l].size())
            return false;
    return true;
}

Eigen::VectorXd ParamSet::flatten() const {
    Eigen::VectorXd out(size());
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        out.segment(k, W[l].size()) = W[l].reshaped();
        k += W[l].size();
        out.segment(k, b[l].size()) = b[l];
        k += b[l].size();
    }
    return out;
}

void ParamSet::assign(const Eigen::VectorXd& flat) {
    if (flat.size() != size()) throw ShapeMismatch("flat parameter vector has the wrong length");
    Eigen::Index k = 0;
    for (std::size_t l = 0; l < W.size(); ++l) {
        W[l].reshaped() = flat.segment(k, W[l].size());
        k += W[l].size();
        b[l] = flat.segment(k, b[l].size());
        k += b[l].size();
    }
}

MlpSpec critic_spec(CriticLayout layout, int state_dim, int param_dim, int heads, std::vector<int> hidden) {
    MlpSpec s;
    s.hidden = std::move(hidden);
    switch (layout) {
        case CriticLayout::Continuous:
            s.input_dim = state_dim + param_dim;
            s.output_dim = 1;
            break;
        case CriticLayout::Discrete:
            s.input_dim = state_dim;
            s.output_dim = heads;
            break;
        case CriticLayout::Hybrid:
            s.input_dim = state_dim + param_dim;
            s.output_dim = heads;
            break;
    }
    s.validate();
    return s;
}

MlpSpec actor_spec(int state_dim, int action_dim, std::vector<int> hidden) {
    MlpSpec s{state_dim, std::move(hidden), action_dim, Activation::Relu, Activation::Tanh};
    s.validate();
    return s;
}

namespace {

void activate(Eigen::MatrixXd& z, Activation act) {
    switch (act) {
        case Activation::Identity: break;
        case Activation::Relu: z = z.cwiseMax(0.0); break;
        case Activation::Tanh: z = z.array().tanh(); break;
    }
}

// Multiplies the upstream gradient by the activation derivative, expressed through the output y.
void activation_grad(Eigen::MatrixXd& g, const Eigen::MatrixXd& y, Activation act) {
    switch (act) {
        case Activation::Identity: break;
        case Activation::Relu: g = (y.array() > 0.0).select(g, 0.0); break;
        case Activation::Tanh: g = g.array() * (1.0 - y.array().square()); break;
    }
}

}  // namespace

Mlp::Mlp(MlpSpec spec, std::mt19937_64& rng) : spec_(std::move(spec)) {
    spec_.validate();
    int in = spec_.input_dim;
    for (int l = 0; l < spec_.layers(); ++l) {
        const int out = l + 1 < spec_.layers() ? spec_.hidden[l] : spec_.output_dim;
        const double bound = 1.0 / std::sqrt(double(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Eigen::MatrixXd w(out, in);
        for (Eigen::Index j = 0; j < w.cols(); ++j)
            for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
        Eigen::VectorXd b(out);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = u(rng);
        p_.W.push_back(std::move(w));
        p_.b.push_back(std::move(b));
        in = out;
    }
}

Mlp::Mlp(MlpSpec spec, ParamSet params) : spec_(std::move(spec)), p_(std::move(params)) {
    spec_.validate();
    if (int(p_.W.size()) != spec_.layers() || p_.b.size() != p_.W.size())
        throw ShapeMismatch("parameter count does not match the layer count");
    int in = spec_.input_dim;
    for (int l = 0; l < spec_.layers(); ++l) {
        const int out = l + 1 < spec_.layers() ? spec_.hidden[l] : spec_.output_dim;
        if (p_.W[l].rows() != out || p_.W[l].cols() != in || p_.b[l].size() != out)
            throw ShapeMismatch("layer " + std::to_string(l) + " has the wrong shape");
        in = out;
    }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
    if (x.rows() != spec_.input_dim) throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows");
    Eigen::MatrixXd h = x;
    for (int l = 0; l < spec_.layers(); ++l) {
        Eigen::MatrixXd z = p_.W[l] * h;
        z.colwise() += p_.b[l];
        activate(z, l + 1 < spec_.layers() ? spec_.hidden_act : spec_.output_act);
        h = std::move(z);
    }
    return h;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Tape& tape) const {
    if (x.rows() != spec_.input_dim) throw ShapeMismatch("input has " + std::to_string(x.rows()) + " rows");
    tape.a.resize(spec_.layers() + 1);
    tape.a[0] = x;
    for (int l = 0; l < spec_.layers(); ++l) {
        Eigen::MatrixXd z = p_.W[l] * tape.a[l];
        z.colwise() += p_.b[l];
        activate(z, l + 1 < spec_.layers() ? spec_.hidden_act : spec_.output_act);
        tape.a[l + 1] = std::move(z);
    }
    return tape.a.back();
}

Eigen::VectorXd Mlp::forward_one(const Eigen::VectorXd& x) const { return forward(Eigen::MatrixXd(x)).col(0); }

ParamSet Mlp::backward(const Tape& tape, const Eigen::MatrixXd& upstream, Eigen::MatrixXd* input_grad) const {
    const int L = spec_.layers();
    if (int(tape.a.size()) != L + 1) throw ShapeMismatch("tape does not belong to this network");
    if (upstream.rows() != spec_.output_dim || upstream.cols() != tape.a.back().cols())
        throw ShapeMismatch("upstream gradient shape does not match the output");
    ParamSet g;
    g.W.resize(L);
    g.b.resize(L);
    Eigen::MatrixXd delta = upstream;
    for (int l = L - 1; l >= 0; --l) {
        activation_grad(delta, tape.a[l + 1], l + 1 < L ? spec_.hidden_act : spec_.output_act);
        g.W[l] = delta * tape.a[l].transpose();
        g.b[l] = delta.rowwise().sum();
        if (l > 0 || input_grad) delta = p_.W[l].transpose() * delta;
    }
    if (input_grad) *input_grad = std::move(delta);
    return g;
}

void sgd_step(ParamSet& p, const ParamSet& grad, double lr) {
    if (!p.same_shape(grad)) throw ShapeMismatch("gradient shape");
    if (!grad.all_finite()) throw NonFiniteGradient("sgd step");
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        p.W[l] -= lr * grad.W[l];
        p.b[l] -= lr * grad.b[l];
    }
}

Adam::Adam(const ParamSet& like, AdamParams hp)
    : hp_(hp), m_(ParamSet::zeros_like(like)), v_(ParamSet::zeros_like(like)) {}

void Adam::step(ParamSet& p, const ParamSet& grad) {
    if (!p.same_shape(grad) || !p.same_shape(m_)) throw ShapeMismatch("adam step");
    if (!grad.all_finite()) throw NonFiniteGradient("adam step");
    ++t_;
    const double c1 = 1.0 - std::pow(hp_.beta1, double(t_));
    const double c2 = 1.0 - std::pow(hp_.beta2, double(t_));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m = hp_.beta1 * m + (1.0 - hp_.beta1) * g;
        v = hp_.beta2 * v + (1.0 - hp_.beta2) * g.cwiseProduct(g);
        param.array() -= hp_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + hp_.eps);
    };
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        update(p.W[l], m_.W[l], v_.W[l], grad.W[l]);
        update(p.b[l], m_.b[l], v_.b[l], grad.b[l]);
    }
}

void polyak_update(ParamSet& target, const ParamSet& online, double tau) {
    if (!target.same_shape(online)) throw ShapeMismatch("polyak update");
    for (std::size_t l = 0; l < target.W.size(); ++l) {
        target.W[l] = tau * online.W[l] + (1.0 - tau) * target.W[l];
        target.b[l] = tau * online.b[l] + (1.0 - tau) * target.b[l];
    }
}

namespace {

const char* act_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        default: return "identity";
    }
}

Activation parse_act(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "identity") return Activation::Identity;
    throw IncompatibleCheckpoint("unknown activation " + s);
}

void write_double(std::ostream& os, double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%a", x);
    os << buf;
}

double read_double(std::istream& is) {
    std::string tok;
    if (!(is >> tok)) throw IncompatibleCheckpoint("truncated parameter list");
    char* end = nullptr;
    const double x = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw IncompatibleCheckpoint("bad number " + tok);
    return x;
}

}  // namespace

void save_mlp(std::ostream& os, const Mlp& net) {
    const MlpSpec& s = net.spec();
    os << "mlp 1\n" << s.input_dim << ' ' << s.output_dim << ' ' << s.hidden.size();
    for (int h : s.hidden) os << ' ' << h;
    os << ' ' << act_name(s.hidden_act) << ' ' << act_name(s.output_act) << '\n';
    const ParamSet& p = net.params();
    for (std::size_t l = 0; l < p.W.size(); ++l) {
        for (Eigen::Index i = 0; i < p.W[l].size(); ++i) {
            write_double(os, p.W[l].reshaped()[i]);
            os << (i + 1 == p.W[l].size() ? '\n' : ' ');
        }
        for (Eigen::Index i = 0; i < p.b[l].size(); ++i) {
            write_double(os, p.b[l][i]);
            os << (i + 1 == p.b[l].size() ? '\n' : ' ');
        }
    }
}

Mlp load_mlp(std::istream& is) {
    std::string tag;
    int version = 0;
    if (!(is >> tag >> version) || tag != "mlp" || version != 1) throw IncompatibleCheckpoint("not an mlp v1 block");
    MlpSpec s;
    std::size_t n_hidden = 0;
    if (!(is >> s.input_dim >> s.output_dim >> n_hidden) || n_hidden > 64)
        throw IncompatibleCheckpoint("bad mlp header");
    s.hidden.resize(n_hidden);
    for (int& h : s.hidden)
        if (!(is >> h)) throw IncompatibleCheckpoint("bad hidden widths");
    std::string ha, oa;
    is >> ha >> oa;
    s.hidden_act = parse_act(ha);
    s.output_act = parse_act(oa);
    try {
        s.validate();
    } catch (const ShapeMismatch& e) {
        throw IncompatibleCheckpoint(e.what());
    }
    ParamSet p;
    int in = s.input_dim;
    for (int l = 0; l < s.layers(); ++l) {
        const int out = l + 1 < s.layers() ? s.hidden[l] : s.output_dim;
        Eigen::MatrixXd w(out, in);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.reshaped()[i] = read_double(is);
        Eigen::VectorXd b(out);
        for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = read_double(is);
        p.W.push_back(std::move(w));
        p.b.push_back(std::move(b));
        in = out;
    }
    return Mlp(std::move(s), std::move(p));
}

}  // namespace optdrive

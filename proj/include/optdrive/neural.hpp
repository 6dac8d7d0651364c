#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <random>
#include <vector>

namespace optdrive {

enum class Activation { Identity, Relu, Tanh };

struct MlpSpec {
    int input_dim = 1;
    std::vector<int> hidden;
    int output_dim = 1;
    Activation hidden_act = Activation::Relu;
    Activation output_act = Activation::Identity;

    int layers() const { return int(hidden.size()) + 1; }
    void validate() const;
    bool operator==(const MlpSpec&) const = default;
};

// Weights and biases per layer. Gradients and optimizer moments share the layout.
struct ParamSet {
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;

    static ParamSet zeros_like(const ParamSet& p);
    Eigen::Index size() const;
    bool all_finite() const;
    bool same_shape(const ParamSet& o) const;
    // Flat view for finite differences and comparisons, layer by layer, W column-major then b.
    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);
};

enum class CriticLayout {
    Continuous,  // state + action in, one value out
    Discrete,    // state in, one value per discrete action
    Hybrid,      // state + continuous parameter in, one value per discrete action
};

MlpSpec critic_spec(CriticLayout layout, int state_dim, int param_dim, int heads,
                    std::vector<int> hidden = {64, 32});
MlpSpec actor_spec(int state_dim, int action_dim, std::vector<int> hidden = {32, 16, 8});

class Mlp {
public:
    // Activations of every layer for one batch; a.front() is the input, a.back() the output.
    struct Tape {
        std::vector<Eigen::MatrixXd> a;
    };

    Mlp() = default;
    Mlp(MlpSpec spec, std::mt19937_64& rng);
    Mlp(MlpSpec spec, ParamSet params);

    const MlpSpec& spec() const { return spec_; }
    const ParamSet& params() const { return p_; }
    ParamSet& params() { return p_; }

    // Columns are samples.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape& tape) const;
    Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const;

    // Gradient of sum(upstream .* output) with respect to the parameters, and optionally the input.
    ParamSet backward(const Tape& tape, const Eigen::MatrixXd& upstream, Eigen::MatrixXd* input_grad = nullptr) const;

private:
    MlpSpec spec_;
    ParamSet p_;
};

void sgd_step(ParamSet& p, const ParamSet& grad, double lr);

struct AdamParams {
    double lr = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(const ParamSet& like, AdamParams hp);
    void step(ParamSet& p, const ParamSet& grad);
    long steps() const { return t_; }

private:
    AdamParams hp_;
    ParamSet m_, v_;
    long t_ = 0;
};

// target <- tau * online + (1 - tau) * target
void polyak_update(ParamSet& target, const ParamSet& online, double tau);

// Plain text, doubles in hexfloat so a round trip is exact.
void save_mlp(std::ostream& os, const Mlp& net);
Mlp load_mlp(std::istream& is);

}  // namespace optdrive

#pragma once

// Independent checks shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cmath>
#include <random>

#include "optdrive/neural.hpp"
#include "optdrive/safety.hpp"

namespace optdrive::oracle {

struct FdResult {
    double params = 0;
    double input = 0;
};

// Max relative error of backward against central differences for L = sum(C .* f(X)).
inline FdResult fd_check(Mlp net, std::uint64_t seed, double h = 1e-5) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const int B = 3;
    Eigen::MatrixXd x(net.spec().input_dim, B), c(net.spec().output_dim, B);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < c.size(); ++i) c.data()[i] = n(rng);
    auto loss = [&](const Mlp& m, const Eigen::MatrixXd& in) { return (c.array() * m.forward(in).array()).sum(); };

    Mlp::Tape tape;
    net.forward(x, tape);
    Eigen::MatrixXd gx;
    const Eigen::VectorXd g = net.backward(tape, c, &gx).flatten();
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); };

    FdResult out;
    const Eigen::VectorXd theta = net.params().flatten();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        Eigen::VectorXd t = theta;
        t[i] += h;
        net.params().assign(t);
        const double up = loss(net, x);
        t[i] -= 2 * h;
        net.params().assign(t);
        const double down = loss(net, x);
        out.params = std::max(out.params, rel(g[i], (up - down) / (2 * h)));
    }
    net.params().assign(theta);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::MatrixXd xp = x, xm = x;
        xp.data()[i] += h;
        xm.data()[i] -= h;
        out.input = std::max(out.input, rel(gx.data()[i], (loss(net, xp) - loss(net, xm)) / (2 * h)));
    }
    return out;
}

// Random longitudinal scene: several vehicles around the subject in random lateral positions.
inline Scene random_scene(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Scene s;
    s.v = 36.11 * u(rng);
    s.d = 1.0 + 8.5 * u(rng);
    const int n = 1 + int(u(rng) * 5);
    for (int i = 0; i < n; ++i) {
        Neighbor nb;
        nb.ds = (u(rng) < 0.7 ? 1 : -1) * (s.length + 0.5 + 120 * u(rng));
        nb.d = u(rng) < 0.5 ? s.d + 0.6 * (u(rng) - 0.5) : 1.0 + 8.5 * u(rng);
        nb.v = 36.11 * u(rng);
        s.others.push_back(nb);
    }
    return s;
}

struct Soundness {
    int scenes = 0;
    int checked = 0;      // leader pairs rolled out
    int emergencies = 0;  // pairs where even full braking now is too late
    int violations = 0;
};

// Executes the extreme in-bounds velocity reference, then rolls the worst case forward with an
// independent fine-step integrator (leader brakes at b from the start, follower after the reaction
// time) and checks min(gap, gap + vL^2/2b - vF^2/2b) > gap_safe along the way.
inline Soundness braking_soundness(int scenes, std::mt19937_64& rng, const SafetyParams& p) {
    Soundness r;
    for (int i = 0; i < scenes; ++i) {
        const Scene s = random_scene(rng);
        ++r.scenes;
        const ActionBounds b = action_bounds(s, p);
        const double accel = std::clamp(s.k_v * b.dv_ub, -p.b, s.a_max);
        for (const Neighbor& n : s.others) {
            if (n.ds <= 0 || lateral_gap(s.d, s.width, n.d, n.width) >= p.lat_margin) continue;
            const double gap = bumper_gap(s, n);
            if (!(reaction_min_gap(gap, n.v, s.v, -p.b, p) > p.gap_safe)) {
                ++r.emergencies;
                continue;
            }
            ++r.checked;
            const double h = 1e-3;
            double g = gap, vl = n.v, vf = s.v;
            for (double t = 0; t < 30 && (vl > 0 || vf > 0); t += h) {
                const double af = t < p.reaction_time ? accel : -p.b;
                const double vl1 = std::max(0.0, vl - p.b * h), vf1 = std::max(0.0, vf + af * h);
                g += 0.5 * (vl + vl1) * h - 0.5 * (vf + vf1) * h;
                vl = vl1;
                vf = vf1;
                if (t >= p.reaction_time && !(std::min(g, g + (vl * vl - vf * vf) / (2 * p.b)) > p.gap_safe - 1e-6)) {
                    ++r.violations;
                    break;
                }
            }
        }
    }
    return r;
}

}  // namespace optdrive::oracle

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "optdrive/errors.hpp"
#include "optdrive/experiments.hpp"

using namespace optdrive;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string agent;
    std::optional<double> density;
    std::string out;
    std::string checkpoint;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--config", c.config, "INI experiment file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "run a single seed");
    app->add_option("--agent", c.agent, "agent kind")
        ->check(CLI::IsMember({"continuous", "single", "combined", "hybrid", "idm-mobil"}));
    app->add_option("--density", c.density, "traffic density, vehicles per km");
    app->add_option("--out", c.out, "output directory");
}

ExperimentConfig resolve(const Common& c) {
    ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
    if (!c.agent.empty()) {
        cfg.agent = c.agent;
        if (c.agent != "idm-mobil") cfg.train.kind = parse_agent_kind(c.agent);
    }
    if (c.seed) cfg.seeds = {*c.seed};
    if (c.density) cfg.train.density = *c.density;
    if (!c.out.empty()) cfg.out = c.out;
    cfg.validate();
    return cfg;
}

// Explicit checkpoint, else the best one of a previous `train` into the same output directory.
EvalPolicy policy_for(const Common& c, const ExperimentConfig& cfg) {
    if (!c.checkpoint.empty()) return EvalPolicy::load(c.checkpoint);
    if (cfg.agent == "idm-mobil") return EvalPolicy::idm_mobil();
    return EvalPolicy::load((fs::path(cfg.out) / cfg.agent / "best_checkpoint.ckpt").string());
}

fs::path report_dir(const ExperimentConfig& cfg) {
    const fs::path dir = fs::path(cfg.out) / cfg.agent;
    fs::create_directories(dir);
    return dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe option-based highway driving: training and evaluation"};
    app.require_subcommand(1);

    Common train_c, bench_c, test_c, act_c;
    int threads = 0;
    bool quiet = false;
    auto* train_cmd = app.add_subcommand("train", "train one agent over the configured seeds");
    add_common(train_cmd, train_c);
    train_cmd->add_option("--threads", threads, "parallel seeds, 0 = hardware concurrency");
    train_cmd->add_flag("--quiet", quiet, "no per-episode progress");

    OvertakingScenario scenario;
    auto* bench_cmd = app.add_subcommand("benchmark", "overtaking scenario, per-step trace");
    add_common(bench_cmd, bench_c);
    bench_cmd->add_option("--checkpoint", bench_c.checkpoint, "agent checkpoint file");
    bench_cmd->add_option("--lead-speed", scenario.lead_speed, "m/s");
    bench_cmd->add_option("--lead-gap", scenario.lead_gap, "m");
    bench_cmd->add_option("--steps", scenario.steps);

    auto* test_cmd = app.add_subcommand("test", "returns and driving statistics over traffic densities");
    add_common(test_cmd, test_c);
    test_cmd->add_option("--checkpoint", test_c.checkpoint, "agent checkpoint file");

    int act_episodes = 10;
    auto* act_cmd = app.add_subcommand("activity", "fraction of steps each option is active");
    add_common(act_cmd, act_c);
    act_cmd->add_option("--checkpoint", act_c.checkpoint, "agent checkpoint file");
    act_cmd->add_option("--episodes", act_episodes)->check(CLI::PositiveNumber);

    std::string runs_dir, curve_out;
    auto* plot_cmd = app.add_subcommand("plot-data", "aggregate per-seed metrics into learning curves");
    plot_cmd->add_option("--runs", runs_dir, "directory holding seed_*/metrics.csv")->required()
        ->check(CLI::ExistingDirectory);
    plot_cmd->add_option("--out", curve_out, "curve CSV, default <runs>/curve.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*train_cmd) {
            const ExperimentConfig cfg = resolve(train_c);
            const CampaignResult r = run_campaign(cfg, threads, quiet ? nullptr : &std::cerr);
            const Checkpoint& best = r.runs[r.best.run].result.checkpoints[r.best.index];
            std::cout << "best: seed " << cfg.seeds[r.best.run] << " episode " << best.episode << " mean return "
                      << best.mean_eval_return << " -> " << r.best_checkpoint.string() << '\n';
        } else if (*bench_cmd) {
            const ExperimentConfig cfg = resolve(bench_c);
            EvalPolicy pol = policy_for(bench_c, cfg);
            scenario.ego_speed = cfg.train.env.v_max();
            const auto trace = run_benchmark(pol, scenario, cfg.train.env);
            const fs::path file = report_dir(cfg) / "overtaking.csv";
            std::ofstream f(file);
            write_trace_csv(f, trace, pol.activity());
            std::cout << file.string() << '\n';
        } else if (*test_cmd) {
            const ExperimentConfig cfg = resolve(test_c);
            EvalPolicy pol = policy_for(test_c, cfg);
            std::vector<double> densities = cfg.test_densities;
            if (test_c.density) densities = {*test_c.density};
            std::vector<DensityResult> rows;
            for (std::size_t i = 0; i < densities.size(); ++i) {
                // Seeds follow the position in the configured list, so a single --density reuses its scenarios.
                const auto it = std::find(cfg.test_densities.begin(), cfg.test_densities.end(), densities[i]);
                const int idx = it != cfg.test_densities.end() ? int(it - cfg.test_densities.begin()) : int(i);
                rows.push_back(test_density(pol, densities[i], idx, cfg.test_episodes, cfg.train.env));
                std::cerr << "density " << densities[i] << ": mean return " << rows.back().ret.mean << '\n';
            }
            const fs::path file = report_dir(cfg) / ("test_" + pol.name() + ".csv");
            std::ofstream f(file);
            write_test_csv(f, rows);
            std::cout << file.string() << '\n';
        } else if (*act_cmd) {
            const ExperimentConfig cfg = resolve(act_c);
            EvalPolicy pol = policy_for(act_c, cfg);
            const ActivityReport rep = activity_report(pol, cfg.train.density, act_episodes, cfg.train.env);
            const fs::path file = report_dir(cfg) / "activity.csv";
            std::ofstream f(file);
            write_activity_csv(f, rep);
            std::cout << file.string() << '\n';
        } else if (*plot_cmd) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(runs_dir))
                if (e.is_directory() && fs::exists(e.path() / "metrics.csv")) files.push_back(e.path() / "metrics.csv");
            if (files.empty()) throw ConfigInvalid("no seed_*/metrics.csv under " + runs_dir);
            std::sort(files.begin(), files.end());
            const fs::path file = curve_out.empty() ? fs::path(runs_dir) / "curve.csv" : fs::path(curve_out);
            std::ofstream f(file);
            write_curve_csv(f, files);
            std::cout << file.string() << '\n';
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    return 0;
}

// Command-line front end: environment generation, ground-truth sweeps,
// training, inference, and the simulation studies.
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "inferbeam/experiments.hpp"

using namespace inferbeam;
namespace fs = std::filesystem;

namespace {

fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (p.is_absolute()) return p;
    if (const char* root = std::getenv("INFERBEAM_OUT_ROOT")) return fs::path(root) / p;
    return p;
}

std::ofstream open_out(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    return os;
}

ScenarioConfig load_config(const std::string& config_path, const std::string& family) {
    if (!config_path.empty()) return load_scenario(config_path);
    return scenario_defaults(family_from_string(family));
}

int cmd_gen_env(const ScenarioConfig& cfg, int count, const std::string& out) {
    auto envs = gen_environments(cfg, count, cfg.seed);
    fs::path dir = resolve_out(out);
    fs::create_directories(dir);
    for (std::size_t i = 0; i < envs.size(); ++i) {
        std::ostringstream name;
        name << "env_" << std::setw(3) << std::setfill('0') << i << ".json";
        save_environment((dir / name.str()).string(), envs[i]);
    }
    std::cout << "wrote " << envs.size() << " environments to " << dir.string() << "\n";
    return 0;
}

int cmd_sweep(const std::string& env_path, const std::string& out, unsigned threads) {
    Environment env = load_environment(env_path);
    GroundTruthField gt = sweep_ground_truth(env, threads);
    auto os = open_out(resolve_out(out));
    write_ground_truth(os, gt);
    std::cout << "swept " << gt.nodes.size() << " nodes\n";
    return 0;
}

int cmd_train(const ScenarioConfig& cfg, const std::string& out) {
    Grid3D grid(cfg.dims, cfg.spacing_m);
    GridCrf model_bs(grid, cfg.n_bs, cfg.max_rank);
    GridCrf model_sec(grid, cfg.n_sec_bs * cfg.n_sec_ue, cfg.max_rank);
    TrainedModels models = train_scenario(cfg, model_bs, model_sec);
    fs::path dir = resolve_out(out);
    fs::create_directories(dir);
    save_params((dir / "theta_bs.txt").string(), models.theta_bs);
    save_params((dir / "theta_sec.txt").string(), models.theta_sec);
    std::cout << "trained parameters written to " << dir.string() << "\n";
    return 0;
}

int cmd_infer(const ScenarioConfig& cfg, const std::string& env_path,
              const std::string& theta_bs_path, const std::string& theta_sec_path,
              const std::string& out) {
    Environment env = load_environment(env_path);
    GroundTruthField gt = sweep_ground_truth(env, cfg.threads);
    CrfParams theta_bs = load_params(theta_bs_path);
    CrfParams theta_sec = load_params(theta_sec_path);
    GridCrf model_bs(env.grid, env.space.n_bs, cfg.max_rank);
    GridCrf model_sec(env.grid, env.space.n_sec(), cfg.max_rank);

    auto area = test_area_nodes(cfg, env.grid);
    SampleSet samples = draw_samples(env, gt, area, cfg.sample_fraction, cfg.seed);
    InferenceConfig inference = cfg.inference;
    inference.lbp.n_threads = cfg.threads;
    BeamSelectionMap map =
        bia(samples, theta_bs, theta_sec, model_bs, model_sec, env.space, inference);
    auto os = open_out(resolve_out(out));
    write_beam_map(os, map);
    std::cout << "beam selection map for " << map.entries.size() << " nodes (" << samples.size()
              << " samples)\n";
    return 0;
}

int cmd_simulate(const ScenarioConfig& cfg, const std::string& study, const std::string& out) {
    fs::path dir = resolve_out(out);
    fs::create_directories(dir);
    Grid3D grid(cfg.dims, cfg.spacing_m);
    GridCrf model_bs(grid, cfg.n_bs, cfg.max_rank);
    GridCrf model_sec(grid, cfg.n_sec_bs * cfg.n_sec_ue, cfg.max_rank);

    if (study == "noise") {
        NoiseStudyResult r = noise_robustness_study(cfg, model_bs, model_sec);
        auto os = open_out(dir / "noise.csv");
        os << std::setprecision(12);
        os << "rank,w_clean_bs,w_noisy_bs,w_clean_sec,w_noisy_sec\n";
        for (std::size_t k = 0; k < r.w_clean_bs.size(); ++k)
            os << (k + 1) << ',' << r.w_clean_bs[k] << ',' << r.w_noisy_bs[k] << ','
               << r.w_clean_sec[k] << ',' << r.w_noisy_sec[k] << '\n';
        std::cout << "flip fractions bs=" << r.bs_flip_fraction << " sec=" << r.sec_flip_fraction
                  << " max rel delta exp(w): bs=" << r.max_rel_delta_bs
                  << " sec=" << r.max_rel_delta_sec << "\n";
        return 0;
    }

    TrainedModels models = train_scenario(cfg, model_bs, model_sec);
    if (study == "alignment") {
        AlignmentResult r = run_alignment_study(cfg, models, model_bs, model_sec);
        LatencyReport latency = latency_report(r, cfg.label_space(), cfg.protocol);
        {
            auto os = open_out(dir / "sessions.csv");
            write_sessions_csv(os, r);
        }
        {
            auto os = open_out(dir / "cdf.csv");
            write_cdf_csv(os, r);
        }
        {
            auto os = open_out(dir / "summary.json");
            write_alignment_summary_json(os, r, latency);
        }
        std::cout << "sessions=" << r.sessions.size() << " sls_rate=" << r.sls_rate
                  << " mean_trials=" << r.mean_trials << "\n";
        return 0;
    }
    if (study == "blockage") {
        BlockageStudyResult r = run_blockage_study(cfg, models, model_bs, model_sec);
        auto os = open_out(dir / "blockage.csv");
        write_blockage_csv(os, r);
        std::cout << "triggered=" << r.triggered << " one_trial=" << r.frac_one_trial
                  << " within_4=" << r.frac_within_4 << "\n";
        return 0;
    }
    std::cerr << "error: unknown study: " << study << "\n";
    return 1;
}

int cmd_report(const std::string& sessions_path, const ScenarioConfig& cfg) {
    std::ifstream is(sessions_path);
    if (!is) throw std::runtime_error("cannot read " + sessions_path);
    std::string line;
    std::getline(is, line);  // header
    AlignmentResult r;
    while (std::getline(is, line)) {
        UeSession s;
        int idx, env_idx, sls, resolved;
        char comma;
        std::istringstream ss(line);
        ss >> idx >> comma >> env_idx >> comma >> s.trials >> comma >> s.beacon_exchanges >>
            comma >> sls >> comma >> resolved >> comma >> s.elapsed_ms;
        s.sls_used = sls != 0;
        s.resolved_by_entry = resolved != 0;
        r.sessions.push_back(s);
        r.session_env.push_back(env_idx);
    }
    LatencyReport report = latency_report(r, cfg.label_space(), cfg.protocol);
    std::cout << "sessions:            " << r.sessions.size() << "\n"
              << "mean latency:        " << report.mean_inferbeam_ms << " ms\n"
              << "median latency:      " << report.p50_inferbeam_ms << " ms\n"
              << "p95 latency:         " << report.p95_inferbeam_ms << " ms\n"
              << "traditional latency: " << report.traditional_ms << " ms\n"
              << "mean reduction:      " << report.mean_reduction_pct << " %\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"location-based mm-wave beam selection: inference and protocol simulation"};
    app.require_subcommand(1);

    std::string config_path, family = "condo", out = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned threads = 0;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "scenario config JSON");
        cmd->add_option("--family", family, "toy|condo|office (ignored with --config)");
        cmd->add_option("--seed", seed, "override the scenario seed")
            ->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--threads", threads, "worker threads (0 keeps the scenario value)");
    };
    auto finish_config = [&]() {
        ScenarioConfig cfg = load_config(config_path, family);
        if (seed_set) cfg.seed = seed;
        if (threads > 0) cfg.threads = threads;
        return cfg;
    };

    auto* gen = app.add_subcommand("gen-env", "generate randomized environments");
    int count = 5;
    add_common(gen);
    gen->add_option("--count", count, "number of environments");
    gen->add_option("--out", out, "output directory");

    auto* sweep = app.add_subcommand("sweep", "exhaustive ground-truth sweep of an environment");
    std::string env_path, gt_out = "ground_truth.txt";
    sweep->add_option("--env", env_path, "environment JSON")->required();
    sweep->add_option("--out", gt_out, "output table");
    sweep->add_option("--threads", threads, "worker threads");

    auto* train = app.add_subcommand("train", "offline training on generated environments");
    add_common(train);
    train->add_option("--out", out, "output directory for parameter files");

    auto* infer = app.add_subcommand("infer", "cascaded map inference for one environment");
    std::string theta_bs_path, theta_sec_path, map_out = "beam_map.txt";
    add_common(infer);
    infer->add_option("--env", env_path, "environment JSON")->required();
    infer->add_option("--theta-bs", theta_bs_path, "trained station parameters")->required();
    infer->add_option("--theta-sec", theta_sec_path, "trained sector parameters")->required();
    infer->add_option("--out", map_out, "beam selection map output");

    auto* sim = app.add_subcommand("simulate", "alignment / blockage / noise studies");
    std::string study = "alignment";
    add_common(sim);
    sim->add_option("--study", study, "alignment|blockage|noise");
    sim->add_option("--out", out, "output directory");

    auto* report = app.add_subcommand("report", "latency table from a sessions CSV");
    std::string sessions_path;
    add_common(report);
    report->add_option("--sessions", sessions_path, "sessions.csv from a simulate run")
        ->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_env(finish_config(), count, out);
        if (sweep->parsed()) return cmd_sweep(env_path, gt_out, threads == 0 ? 1 : threads);
        if (train->parsed()) return cmd_train(finish_config(), out);
        if (infer->parsed())
            return cmd_infer(finish_config(), env_path, theta_bs_path, theta_sec_path, map_out);
        if (sim->parsed()) return cmd_simulate(finish_config(), study, out);
        if (report->parsed()) return cmd_report(sessions_path, finish_config());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

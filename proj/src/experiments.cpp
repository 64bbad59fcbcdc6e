#include "inferbeam/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "inferbeam/mathutil.hpp"
#include "json.hpp"

namespace inferbeam {

namespace {

constexpr std::uint64_t kTagTrainEnvs = 0x747261696eULL;
constexpr std::uint64_t kTagTestEnvs = 0x74657374ULL;
constexpr std::uint64_t kTagSamples = 0x73616d70ULL;
constexpr std::uint64_t kTagUe = 0x7565ULL;
constexpr std::uint64_t kTagBlockage = 0x626c6bULL;
constexpr std::uint64_t kTagNoise = 0x6e6f6973ULL;

}  // namespace

Family family_from_string(const std::string& name) {
    if (name == "toy") return Family::toy;
    if (name == "condo") return Family::condo;
    if (name == "office") return Family::office;
    throw std::invalid_argument("unknown environment family: " + name);
}

std::string family_name(Family family) {
    switch (family) {
        case Family::toy: return "toy";
        case Family::condo: return "condo";
        case Family::office: return "office";
    }
    return "?";
}

ScenarioConfig scenario_defaults(Family family) {
    ScenarioConfig cfg;
    cfg.family = family;
    cfg.protocol.maintain_samples = false;  // studies probe a frozen map
    cfg.train.engine = TrainConfig::Engine::gibbs;
    cfg.train.persistent_chains = true;
    cfg.train.gibbs.n_chains = 2;
    cfg.train.gibbs.n_sweeps = 40;
    cfg.train.gibbs.burn_in = 20;
    cfg.train.sweeps_per_iter = 10;
    cfg.train.max_iters = 120;
    cfg.train.tied_m = true;
    // the analytic priors carry the transferable structure; keep them strong
    cfg.train.prior_sigma_w = 0.1;
    cfg.train.prior_sigma_m = 0.3;

    // basin-mixing sampler for the study maps
    cfg.inference.engine = InferenceConfig::Engine::gibbs;
    cfg.inference.gibbs.n_chains = 32;
    cfg.inference.gibbs.n_sweeps = 110;
    cfg.inference.gibbs.burn_in = 25;
    cfg.inference.gibbs_bs_chains = 64;

    switch (family) {
        case Family::toy:
            cfg.dims = {8, 8, 2};
            cfg.spacing_m = 0.15;
            cfg.n_bs = 2;
            cfg.n_sec_bs = cfg.n_sec_ue = 6;
            cfg.n_obstacles = 2;
            cfg.sample_fraction = 0.06;
            cfg.loc_error_m = 0.15;
            cfg.n_ue = 200;
            cfg.n_train_envs = 6;
            cfg.train.eta = 2e-4;
            cfg.channel.shadow_decorrelation_m = 0.5;
            break;
        case Family::condo:
            cfg.dims = {20, 18, 8};
            cfg.spacing_m = 0.15;
            cfg.n_bs = 3;
            cfg.n_sec_bs = cfg.n_sec_ue = 12;
            cfg.n_obstacles = 5;
            cfg.sample_fraction = 0.01;
            cfg.loc_error_m = 0.15;
            cfg.n_ue = 1000;
            cfg.n_train_envs = 8;
            cfg.train.eta = 3e-5;
            cfg.train.prior_sigma_w = 0.005;
            cfg.train.prior_sigma_m = 0.3;
            cfg.channel.shadow_decorrelation_m = 2.0;
            cfg.n_obstacles = 3;
            break;
        case Family::office:
            cfg.dims = {35, 20, 5};
            cfg.spacing_m = 0.40;
            cfg.n_bs = 6;
            cfg.n_sec_bs = cfg.n_sec_ue = 12;
            cfg.n_obstacles = 10;
            cfg.sample_fraction = 0.01;
            cfg.loc_error_m = 1.0;
            cfg.n_ue = 1000;
            cfg.n_train_envs = 8;
            cfg.train.eta = 2e-5;
            cfg.train.prior_sigma_w = 0.005;
            cfg.train.prior_sigma_m = 0.3;
            cfg.channel.shadow_decorrelation_m = 2.5;
            break;
    }
    return cfg;
}

std::vector<Environment> gen_environments(const ScenarioConfig& cfg, int count,
                                          std::uint64_t seed) {
    if (count < 1) throw std::invalid_argument("environment count must be >= 1");
    std::vector<Environment> envs;
    envs.reserve(count);

    double sx = (cfg.dims.x - 1) * cfg.spacing_m;
    double sy = (cfg.dims.y - 1) * cfg.spacing_m;
    double sz = (cfg.dims.z - 1) * cfg.spacing_m;

    for (int i = 0; i < count; ++i) {
        Rng rng(hash_combine(seed, 0x656e76ULL, i));
        Environment env{Grid3D(cfg.dims, cfg.spacing_m), {}, {}, cfg.label_space(), cfg.channel,
                        hash_combine(seed, 0x636831ULL, i)};
        double min_separation = 0.35 * std::min(sx, sy);
        for (int b = 0; b < cfg.n_bs; ++b) {
            // ceiling mount along a random wall: every node then sees the
            // station inside a narrow azimuth fan; stations keep a minimum
            // spacing as a deployment would
            BaseStation bs;
            for (int attempt = 0; attempt < 64; ++attempt) {
                double along = rng.uniform(0.1, 0.9);
                double inset = rng.uniform(0.03, 0.12);
                switch (int(rng.uniform_int(4))) {
                    case 0: bs.position = {along * sx, inset * sy, 0}; break;
                    case 1: bs.position = {along * sx, (1.0 - inset) * sy, 0}; break;
                    case 2: bs.position = {inset * sx, along * sy, 0}; break;
                    default: bs.position = {(1.0 - inset) * sx, along * sy, 0}; break;
                }
                bool spaced = true;
                for (const BaseStation& other : env.bs_list) {
                    Vec3 d{bs.position.x - other.position.x, bs.position.y - other.position.y,
                           0.0};
                    if (norm(d) < min_separation) spaced = false;
                }
                if (spaced) break;
            }
            bs.position.z = rng.uniform(0.85 * sz, sz);
            bs.orientation_rad = rng.uniform(0.0, 2.0 * M_PI);
            env.bs_list.push_back(bs);
        }
        double foot_lo = 0.08 * std::min(sx, sy), foot_hi = 0.25 * std::min(sx, sy);
        for (int o = 0; o < cfg.n_obstacles; ++o) {
            ObstacleBox box;
            box.dims = {rng.uniform(foot_lo, foot_hi), rng.uniform(foot_lo, foot_hi),
                        rng.uniform(0.25 * sz, 0.7 * sz)};
            box.min_corner = {rng.uniform(0.0, sx - box.dims.x),
                              rng.uniform(0.0, sy - box.dims.y), 0.0};
            box.penetration_db = rng.uniform(10.0, 18.0);
            env.obstacles.push_back(box);
        }
        envs.push_back(std::move(env));
    }
    return envs;
}

std::vector<NodeIndex> test_area_nodes(const ScenarioConfig& cfg, const Grid3D& grid) {
    double extent = (grid.dims().z - 1) * grid.spacing();
    double lo = cfg.z_band_lo_frac * extent, hi = cfg.z_band_hi_frac * extent;
    std::vector<int> layers;
    for (int iz = 0; iz < grid.dims().z; ++iz) {
        double z = iz * grid.spacing();
        if (z >= lo - 1e-9 && z <= hi + 1e-9) layers.push_back(iz);
    }
    if (layers.empty()) {
        layers.resize(grid.dims().z);
        std::iota(layers.begin(), layers.end(), 0);
    }
    std::vector<NodeIndex> nodes;
    for (int iz : layers)
        for (int iy = 0; iy < grid.dims().y; ++iy)
            for (int ix = 0; ix < grid.dims().x; ++ix) nodes.push_back(grid.index_of({ix, iy, iz}));
    std::sort(nodes.begin(), nodes.end());
    return nodes;
}

SampleSet draw_samples(const Environment& env, const GroundTruthField& gt,
                       const std::vector<NodeIndex>& area, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("sample fraction must be in (0, 1]");
    // fraction of all grid nodes, placed uniformly inside the test area
    std::size_t count = std::max<std::size_t>(
        1, std::llround(fraction * static_cast<double>(env.grid.node_count())));
    count = std::min(count, area.size());

    std::vector<NodeIndex> pool = area;
    Rng rng(hash_combine(seed, kTagSamples));
    SampleSet set;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + rng.uniform_int(pool.size() - i);
        std::swap(pool[i], pool[j]);
        NodeIndex v = pool[i];
        set.add({v, gt.nodes[v].best, env.grid.position_of(v)});
    }
    return set;
}

UePlacement draw_ue_placement(const ScenarioConfig& cfg, const Grid3D& grid, std::uint64_t seed,
                              int index) {
    Rng rng(hash_combine(seed, kTagUe, index));
    double sx = (grid.dims().x - 1) * grid.spacing();
    double sy = (grid.dims().y - 1) * grid.spacing();
    double sz = (grid.dims().z - 1) * grid.spacing();
    double zlo = cfg.z_band_lo_frac * sz, zhi = cfg.z_band_hi_frac * sz;
    if (zhi <= zlo) {
        zlo = 0.0;
        zhi = sz;
    }
    UePlacement p;
    p.true_location = {rng.uniform(0.0, sx), rng.uniform(0.0, sy), rng.uniform(zlo, zhi)};
    // uniform in the unit ball: gaussian direction, cube-root radius
    double gx = rng.gaussian(), gy = rng.gaussian(), gz = rng.gaussian();
    double len = std::sqrt(gx * gx + gy * gy + gz * gz);
    if (len < 1e-12) len = 1.0;
    double radius = std::cbrt(rng.uniform01());
    p.ball_offset = {radius * gx / len, radius * gy / len, radius * gz / len};
    return p;
}

TrainedModels train_scenario(const ScenarioConfig& cfg, const GridCrf& model_bs,
                             const GridCrf& model_sec) {
    std::vector<Environment> envs =
        gen_environments(cfg, cfg.n_train_envs, hash_combine(cfg.seed, kTagTrainEnvs));
    LabelSpace space = cfg.label_space();

    TrainingSet data_bs, data_sec;
    for (const Environment& env : envs) {
        GroundTruthField gt = sweep_ground_truth(env, cfg.threads);
        std::vector<int> bs_labels(gt.nodes.size()), sec_labels(gt.nodes.size());
        for (std::size_t v = 0; v < gt.nodes.size(); ++v) {
            bs_labels[v] = gt.nodes[v].best.bs;
            sec_labels[v] = sec_id_of(gt.nodes[v].best, space);
        }
        data_bs.labelings.push_back(std::move(bs_labels));
        data_sec.labelings.push_back(std::move(sec_labels));
    }

    TrainConfig train = cfg.train;
    train.gibbs.seed = hash_combine(cfg.seed, 0x74726e31ULL);
    train.gibbs.n_threads = cfg.threads;
    auto [fit_bs, fit_sec] = offline_train(data_bs, data_sec, model_bs, model_sec, train);
    return {truncate_negligible_ranks(fit_bs.params, cfg.neglect_w_floor),
            truncate_negligible_ranks(fit_sec.params, cfg.neglect_w_floor)};
}

AlignmentResult run_alignment_study(const ScenarioConfig& cfg, const TrainedModels& models,
                                    const GridCrf& model_bs, const GridCrf& model_sec) {
    std::vector<Environment> envs =
        gen_environments(cfg, cfg.n_test_envs, hash_combine(cfg.seed, kTagTestEnvs));
    LabelSpace space = cfg.label_space();

    AlignmentResult result;
    result.traditional_ms = traditional_elapsed_ms(space, cfg.protocol);

    int per_env = cfg.n_ue / cfg.n_test_envs;
    int remainder = cfg.n_ue % cfg.n_test_envs;

    for (std::size_t ei = 0; ei < envs.size(); ++ei) {
        const Environment& env = envs[ei];
        GroundTruthField gt = sweep_ground_truth(env, cfg.threads);
        auto area = test_area_nodes(cfg, env.grid);
        SampleSet samples = draw_samples(env, gt, area, cfg.sample_fraction,
                                         hash_combine(cfg.seed, kTagSamples, ei));
        InferenceConfig inference = cfg.inference;
        inference.lbp.n_threads = cfg.threads;
        InferBeamState state(model_bs, model_sec, space, models.theta_bs, models.theta_sec,
                             samples, inference, cfg.protocol);

        int n_ue = per_env + (static_cast<int>(ei) < remainder ? 1 : 0);
        std::vector<UeSession> sessions(n_ue);
        std::uint64_t ue_seed = hash_combine(cfg.seed, kTagUe, ei);
        // sample maintenance mutates the map mid-study; keep that path serial
        unsigned session_threads = cfg.protocol.maintain_samples ? 1 : cfg.threads;
        parallel_for(n_ue, session_threads, [&](std::size_t u) {
            UePlacement p = draw_ue_placement(cfg, env.grid, ue_seed, static_cast<int>(u));
            Vec3 reported = p.true_location;
            reported.x += cfg.loc_error_m * p.ball_offset.x;
            reported.y += cfg.loc_error_m * p.ball_offset.y;
            reported.z += cfg.loc_error_m * p.ball_offset.z;
            sessions[u] = obp(state, env, gt, p.true_location, reported);
        });
        for (auto& s : sessions) {
            result.sessions.push_back(s);
            result.session_env.push_back(static_cast<int>(ei));
        }
    }

    int max_trials = 0;
    for (const UeSession& s : result.sessions) max_trials = std::max(max_trials, s.trials);
    result.cdf.assign(std::max(max_trials, 1), 0.0);
    double n = static_cast<double>(result.sessions.size());
    int sls = 0;
    double trial_sum = 0.0, elapsed_sum = 0.0;
    for (const UeSession& s : result.sessions) {
        if (s.resolved_by_entry)
            for (int t = s.trials; t <= max_trials; ++t) result.cdf[t - 1] += 1.0;
        sls += s.sls_used ? 1 : 0;
        trial_sum += s.trials;
        elapsed_sum += s.elapsed_ms;
    }
    for (double& c : result.cdf) c /= n;
    result.sls_rate = sls / n;
    result.mean_trials = trial_sum / n;
    result.mean_elapsed_ms = elapsed_sum / n;
    return result;
}

BlockageStudyResult run_blockage_study(const ScenarioConfig& cfg, const TrainedModels& models,
                                       const GridCrf& model_bs, const GridCrf& model_sec) {
    std::vector<Environment> envs =
        gen_environments(cfg, 1, hash_combine(cfg.seed, kTagTestEnvs));
    const Environment& env = envs.front();
    LabelSpace space = cfg.label_space();

    GroundTruthField gt = sweep_ground_truth(env, cfg.threads);
    auto area = test_area_nodes(cfg, env.grid);
    SampleSet samples =
        draw_samples(env, gt, area, cfg.sample_fraction, hash_combine(cfg.seed, kTagSamples));
    InferenceConfig inference = cfg.inference;
    inference.lbp.n_threads = cfg.threads;
    InferBeamState state(model_bs, model_sec, space, models.theta_bs, models.theta_sec, samples,
                         inference, cfg.protocol);

    std::uint64_t ue_seed = hash_combine(cfg.seed, kTagBlockage, kTagUe);
    std::vector<UeSession> sessions(cfg.blockage_points);
    unsigned session_threads = cfg.protocol.maintain_samples ? 1 : cfg.threads;
    parallel_for(cfg.blockage_points, session_threads, [&](std::size_t u) {
        UePlacement p = draw_ue_placement(cfg, env.grid, ue_seed, static_cast<int>(u));
        Vec3 reported = p.true_location;
        reported.x += cfg.loc_error_m * p.ball_offset.x;
        reported.y += cfg.loc_error_m * p.ball_offset.y;
        reported.z += cfg.loc_error_m * p.ball_offset.z;
        sessions[u] = obp(state, env, gt, p.true_location, reported);
    });

    BlockageStudyResult result;
    double sx = (cfg.dims.x - 1) * cfg.spacing_m;
    double sy = (cfg.dims.y - 1) * cfg.spacing_m;
    for (int round = 0; round < cfg.blockage_rounds; ++round) {
        Rng rng(hash_combine(cfg.seed, kTagBlockage, round));
        ObstacleBox human;
        human.dims = {0.11, 0.5, 1.7};  // human-proxy blocker
        human.min_corner = {rng.uniform(0.0, std::max(1e-6, sx - human.dims.x)),
                            rng.uniform(0.0, std::max(1e-6, sy - human.dims.y)), 0.0};
        human.penetration_db = 30.0;

        BlockageResult blocked = add_blockage(env, gt, human, cfg.threads);
        std::vector<bool> changed(env.grid.node_count(), false);
        for (NodeIndex v : blocked.changed_nodes) changed[v] = true;

        for (const UeSession& s : sessions) {
            if (!changed[s.true_node]) continue;
            ++result.sessions_checked;
            ObapResult adj = obap(state, s, blocked.env, blocked.field);
            if (!adj.triggered) continue;
            ++result.triggered;
            if (adj.sls_used)
                ++result.sls_adjustments;
            else
                result.additional_trials.push_back(adj.additional_trials);
        }
    }

    if (result.triggered > 0) {
        double n = static_cast<double>(result.triggered);
        int one = 0, four = 0;
        for (int t : result.additional_trials) {
            if (t <= 1) ++one;
            if (t <= 4) ++four;
        }
        result.frac_one_trial = one / n;
        result.frac_within_4 = four / n;
    }
    return result;
}

NoiseStudyResult noise_robustness_study(const ScenarioConfig& cfg, const GridCrf& model_bs,
                                        const GridCrf& model_sec, double bs_flip_target,
                                        double sec_flip_target) {
    std::vector<Environment> envs =
        gen_environments(cfg, cfg.n_train_envs, hash_combine(cfg.seed, kTagTrainEnvs));
    LabelSpace space = cfg.label_space();

    NoiseStudyResult out;
    TrainingSet clean_bs, clean_sec, noisy_bs, noisy_sec;
    double flip_bs_sum = 0.0, flip_sec_sum = 0.0, sigma_bs_sum = 0.0, sigma_sec_sum = 0.0;
    for (std::size_t ei = 0; ei < envs.size(); ++ei) {
        const Environment& env = envs[ei];
        GroundTruthField gt = sweep_ground_truth(env, cfg.threads);
        std::uint64_t noise_seed = hash_combine(cfg.seed, kTagNoise, ei);
        double sigma_bs =
            calibrate_noise_sigma(env, gt, bs_flip_target, noise_seed, LabelKind::bs);
        double sigma_sec =
            calibrate_noise_sigma(env, gt, sec_flip_target, noise_seed, LabelKind::sector);
        flip_bs_sum += label_flip_fraction(env, gt, sigma_bs, noise_seed, LabelKind::bs);
        flip_sec_sum += label_flip_fraction(env, gt, sigma_sec, noise_seed, LabelKind::sector);
        sigma_bs_sum += sigma_bs;
        sigma_sec_sum += sigma_sec;

        auto noisy_from_bs = noisy_truth_labels(env, sigma_bs, noise_seed);
        auto noisy_from_sec = noisy_truth_labels(env, sigma_sec, noise_seed);

        std::vector<int> cb(gt.nodes.size()), cs(gt.nodes.size()), nb(gt.nodes.size()),
            ns(gt.nodes.size());
        for (std::size_t v = 0; v < gt.nodes.size(); ++v) {
            cb[v] = gt.nodes[v].best.bs;
            cs[v] = sec_id_of(gt.nodes[v].best, space);
            nb[v] = noisy_from_bs[v].bs;
            ns[v] = sec_id_of(noisy_from_sec[v], space);
        }
        clean_bs.labelings.push_back(std::move(cb));
        clean_sec.labelings.push_back(std::move(cs));
        noisy_bs.labelings.push_back(std::move(nb));
        noisy_sec.labelings.push_back(std::move(ns));
    }
    out.bs_flip_fraction = flip_bs_sum / envs.size();
    out.sec_flip_fraction = flip_sec_sum / envs.size();
    out.sigma_bs_db = sigma_bs_sum / envs.size();
    out.sigma_sec_db = sigma_sec_sum / envs.size();

    TrainConfig train = cfg.train;
    train.gibbs.seed = hash_combine(cfg.seed, 0x74726e32ULL);
    train.gibbs.n_threads = cfg.threads;
    auto [clean_fit_bs, clean_fit_sec] =
        offline_train(clean_bs, clean_sec, model_bs, model_sec, train);
    auto [noisy_fit_bs, noisy_fit_sec] =
        offline_train(noisy_bs, noisy_sec, model_bs, model_sec, train);
    out.w_clean_bs = clean_fit_bs.params.w;
    out.w_noisy_bs = noisy_fit_bs.params.w;
    out.w_clean_sec = clean_fit_sec.params.w;
    out.w_noisy_sec = noisy_fit_sec.params.w;

    auto max_rel = [](const std::vector<double>& clean, const std::vector<double>& noisy) {
        double worst = 0.0;
        for (std::size_t k = 0; k < clean.size(); ++k) {
            double ec = std::exp(clean[k]);
            if (ec <= 0.1) continue;
            worst = std::max(worst, std::fabs(std::exp(noisy[k]) - ec) / ec);
        }
        return worst;
    };
    out.max_rel_delta_bs = max_rel(out.w_clean_bs, out.w_noisy_bs);
    out.max_rel_delta_sec = max_rel(out.w_clean_sec, out.w_noisy_sec);
    return out;
}

LatencyReport latency_report(const AlignmentResult& result, const LabelSpace& space,
                             const ProtocolConstants& constants) {
    LatencyReport report;
    report.traditional_ms = traditional_elapsed_ms(space, constants);
    if (result.sessions.empty()) return report;

    std::vector<double> elapsed;
    elapsed.reserve(result.sessions.size());
    double sum = 0.0, reduction = 0.0;
    for (const UeSession& s : result.sessions) {
        elapsed.push_back(s.elapsed_ms);
        sum += s.elapsed_ms;
        reduction += (report.traditional_ms - s.elapsed_ms) / report.traditional_ms;
    }
    std::sort(elapsed.begin(), elapsed.end());
    report.mean_inferbeam_ms = sum / elapsed.size();
    report.p50_inferbeam_ms = elapsed[elapsed.size() / 2];
    report.p95_inferbeam_ms = elapsed[static_cast<std::size_t>(0.95 * (elapsed.size() - 1))];
    report.mean_reduction_pct = 100.0 * reduction / elapsed.size();
    return report;
}

void write_sessions_csv(std::ostream& os, const AlignmentResult& result) {
    os << "session,env,trials,beacon_exchanges,sls,resolved,elapsed_ms\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < result.sessions.size(); ++i) {
        const UeSession& s = result.sessions[i];
        os << i << ',' << result.session_env[i] << ',' << s.trials << ',' << s.beacon_exchanges
           << ',' << (s.sls_used ? 1 : 0) << ',' << (s.resolved_by_entry ? 1 : 0) << ','
           << s.elapsed_ms << '\n';
    }
}

void write_cdf_csv(std::ostream& os, const AlignmentResult& result) {
    os << "trials,cdf\n";
    os << std::setprecision(12);
    for (std::size_t i = 0; i < result.cdf.size(); ++i)
        os << (i + 1) << ',' << result.cdf[i] << '\n';
}

void write_blockage_csv(std::ostream& os, const BlockageStudyResult& result) {
    os << "additional_trials,count\n";
    std::map<int, int> hist;
    for (int t : result.additional_trials) ++hist[t];
    for (const auto& [t, c] : hist) os << t << ',' << c << '\n';
}

void write_alignment_summary_json(std::ostream& os, const AlignmentResult& result,
                                  const LatencyReport& latency) {
    nlohmann::json j;
    j["sessions"] = result.sessions.size();
    j["sls_rate"] = result.sls_rate;
    j["mean_trials"] = result.mean_trials;
    j["mean_elapsed_ms"] = result.mean_elapsed_ms;
    j["traditional_ms"] = result.traditional_ms;
    std::size_t idx6 = std::min<std::size_t>(6, result.cdf.size()) - 1;
    j["within_6_trials"] = result.cdf.empty() ? 0.0 : result.cdf[idx6];
    j["latency"] = {{"mean_ms", latency.mean_inferbeam_ms},
                    {"p50_ms", latency.p50_inferbeam_ms},
                    {"p95_ms", latency.p95_inferbeam_ms},
                    {"mean_reduction_pct", latency.mean_reduction_pct}};
    os << j.dump(2) << '\n';
}

// ---- scenario (de)serialization ----

using nlohmann::json;

void write_scenario(std::ostream& os, const ScenarioConfig& cfg) {
    json j;
    j["family"] = family_name(cfg.family);
    j["dims"] = {cfg.dims.x, cfg.dims.y, cfg.dims.z};
    j["spacing_m"] = cfg.spacing_m;
    j["n_bs"] = cfg.n_bs;
    j["n_sec_bs"] = cfg.n_sec_bs;
    j["n_sec_ue"] = cfg.n_sec_ue;
    j["n_obstacles"] = cfg.n_obstacles;
    j["max_rank"] = cfg.max_rank;
    j["sample_fraction"] = cfg.sample_fraction;
    j["loc_error_m"] = cfg.loc_error_m;
    j["n_ue"] = cfg.n_ue;
    j["n_train_envs"] = cfg.n_train_envs;
    j["n_test_envs"] = cfg.n_test_envs;
    j["blockage_points"] = cfg.blockage_points;
    j["blockage_rounds"] = cfg.blockage_rounds;
    j["z_band"] = {cfg.z_band_lo_frac, cfg.z_band_hi_frac};
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["protocol"] = {{"xi_bs", cfg.protocol.xi_bs},
                     {"xi_ue", cfg.protocol.xi_ue},
                     {"p_th", cfg.protocol.p_th},
                     {"beta", cfg.protocol.beta},
                     {"beta_in_cells", cfg.protocol.beta_in_cells},
                     {"alpha_th_mbps", cfg.protocol.alpha_th_mbps},
                     {"t_frame_ms", cfg.protocol.t_frame_ms},
                     {"t_beacon_ms", cfg.protocol.t_beacon_ms},
                     {"t_brp_ms", cfg.protocol.t_brp_ms},
                     {"t_loc_ms", cfg.protocol.t_loc_ms},
                     {"control_latency_ms", cfg.protocol.control_latency_ms},
                     {"maintain_samples", cfg.protocol.maintain_samples}};
    j["neglect_w_floor"] = cfg.neglect_w_floor;
    j["train"] = {{"eta", cfg.train.eta},
                  {"delta", cfg.train.delta},
                  {"max_iters", cfg.train.max_iters},
                  {"engine", cfg.train.engine == TrainConfig::Engine::exact ? "exact" : "gibbs"},
                  {"persistent_chains", cfg.train.persistent_chains},
                  {"sweeps_per_iter", cfg.train.sweeps_per_iter},
                  {"gibbs_chains", cfg.train.gibbs.n_chains},
                  {"gibbs_sweeps", cfg.train.gibbs.n_sweeps},
                  {"gibbs_burn_in", cfg.train.gibbs.burn_in},
                  {"tied_m", cfg.train.tied_m},
                  {"prior_sigma_w", cfg.train.prior_sigma_w},
                  {"prior_sigma_m", cfg.train.prior_sigma_m}};
    os << j.dump(2) << '\n';
}

ScenarioConfig read_scenario(std::istream& is) {
    json j = json::parse(is);
    ScenarioConfig cfg = scenario_defaults(family_from_string(j.at("family")));
    auto get = [&](const char* key, auto& into) {
        if (j.contains(key)) into = j.at(key).get<std::decay_t<decltype(into)>>();
    };
    if (j.contains("dims"))
        cfg.dims = {j["dims"].at(0), j["dims"].at(1), j["dims"].at(2)};
    get("spacing_m", cfg.spacing_m);
    get("n_bs", cfg.n_bs);
    get("n_sec_bs", cfg.n_sec_bs);
    get("n_sec_ue", cfg.n_sec_ue);
    get("n_obstacles", cfg.n_obstacles);
    get("max_rank", cfg.max_rank);
    get("sample_fraction", cfg.sample_fraction);
    get("loc_error_m", cfg.loc_error_m);
    get("n_ue", cfg.n_ue);
    get("n_train_envs", cfg.n_train_envs);
    get("n_test_envs", cfg.n_test_envs);
    get("blockage_points", cfg.blockage_points);
    get("blockage_rounds", cfg.blockage_rounds);
    if (j.contains("z_band")) {
        cfg.z_band_lo_frac = j["z_band"].at(0);
        cfg.z_band_hi_frac = j["z_band"].at(1);
    }
    get("neglect_w_floor", cfg.neglect_w_floor);
    get("seed", cfg.seed);
    get("threads", cfg.threads);
    if (j.contains("protocol")) {
        const json& p = j["protocol"];
        auto getp = [&](const char* key, auto& into) {
            if (p.contains(key)) into = p.at(key).get<std::decay_t<decltype(into)>>();
        };
        getp("xi_bs", cfg.protocol.xi_bs);
        getp("xi_ue", cfg.protocol.xi_ue);
        getp("p_th", cfg.protocol.p_th);
        getp("beta", cfg.protocol.beta);
        getp("beta_in_cells", cfg.protocol.beta_in_cells);
        getp("alpha_th_mbps", cfg.protocol.alpha_th_mbps);
        getp("t_frame_ms", cfg.protocol.t_frame_ms);
        getp("t_beacon_ms", cfg.protocol.t_beacon_ms);
        getp("t_brp_ms", cfg.protocol.t_brp_ms);
        getp("t_loc_ms", cfg.protocol.t_loc_ms);
        getp("control_latency_ms", cfg.protocol.control_latency_ms);
        getp("maintain_samples", cfg.protocol.maintain_samples);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        auto gett = [&](const char* key, auto& into) {
            if (t.contains(key)) into = t.at(key).get<std::decay_t<decltype(into)>>();
        };
        gett("eta", cfg.train.eta);
        gett("delta", cfg.train.delta);
        gett("max_iters", cfg.train.max_iters);
        if (t.contains("engine"))
            cfg.train.engine = t["engine"] == "exact" ? TrainConfig::Engine::exact
                                                      : TrainConfig::Engine::gibbs;
        gett("persistent_chains", cfg.train.persistent_chains);
        gett("sweeps_per_iter", cfg.train.sweeps_per_iter);
        gett("gibbs_chains", cfg.train.gibbs.n_chains);
        gett("gibbs_sweeps", cfg.train.gibbs.n_sweeps);
        gett("gibbs_burn_in", cfg.train.gibbs.burn_in);
        gett("tied_m", cfg.train.tied_m);
        gett("prior_sigma_w", cfg.train.prior_sigma_w);
        gett("prior_sigma_m", cfg.train.prior_sigma_m);
    }
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_scenario(is);
}

}  // namespace inferbeam

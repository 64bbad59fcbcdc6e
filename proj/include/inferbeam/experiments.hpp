#ifndef INFERBEAM_EXPERIMENTS_HPP
#define INFERBEAM_EXPERIMENTS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "inferbeam/channel.hpp"
#include "inferbeam/protocol.hpp"
#include "inferbeam/training.hpp"

namespace inferbeam {

enum class Family { toy, condo, office };

Family family_from_string(const std::string& name);
std::string family_name(Family family);

struct ScenarioConfig {
    Family family = Family::condo;
    IVec3 dims{20, 18, 8};
    double spacing_m = 0.15;
    int n_bs = 3;
    int n_sec_bs = 12;
    int n_sec_ue = 12;
    int n_obstacles = 5;
    ChannelParams channel;
    int max_rank = 8;

    double sample_fraction = 0.01;
    double loc_error_m = 0.35;
    int n_ue = 1000;
    int n_train_envs = 8;
    int n_test_envs = 1;

    int blockage_points = 100;  // aligned sessions per blockage round
    int blockage_rounds = 10;   // random obstacle placements

    // UE test area as fractions of the grid height
    double z_band_lo_frac = 1.0 / 6.0;
    double z_band_hi_frac = 2.0 / 3.0;

    ProtocolConstants protocol;
    InferenceConfig inference;
    TrainConfig train;
    // ranks with exp(w) at or below this carry no usable evidence and are
    // dropped from the trained parameters before inference
    double neglect_w_floor = 0.1;

    std::uint64_t seed = 1;
    unsigned threads = 1;

    LabelSpace label_space() const { return {n_bs, n_sec_bs, n_sec_ue}; }
};

ScenarioConfig scenario_defaults(Family family);

// JSON round-trip so one config file can define a whole study
void write_scenario(std::ostream& os, const ScenarioConfig& cfg);
ScenarioConfig read_scenario(std::istream& is);
ScenarioConfig load_scenario(const std::string& path);

// Randomized environments of one family: BS placements near the ceiling,
// floor-standing box obstacles, deterministic per seed.
std::vector<Environment> gen_environments(const ScenarioConfig& cfg, int count,
                                          std::uint64_t seed);

// grid layers inside the z band (all layers when the band is empty)
std::vector<NodeIndex> test_area_nodes(const ScenarioConfig& cfg, const Grid3D& grid);

// uniform distinct nodes of the area with their ground-truth labels
SampleSet draw_samples(const Environment& env, const GroundTruthField& gt,
                       const std::vector<NodeIndex>& area, double fraction, std::uint64_t seed);

struct UePlacement {
    Vec3 true_location;
    Vec3 ball_offset;  // unit-ball draw; reported = true + loc_error * offset
};

UePlacement draw_ue_placement(const ScenarioConfig& cfg, const Grid3D& grid, std::uint64_t seed,
                              int index);

struct TrainedModels {
    CrfParams theta_bs;
    CrfParams theta_sec;
};

// Sweeps cfg.n_train_envs generated environments into full labelings and runs
// the two-model offline training.
TrainedModels train_scenario(const ScenarioConfig& cfg, const GridCrf& model_bs,
                             const GridCrf& model_sec);

struct AlignmentResult {
    std::vector<UeSession> sessions;
    std::vector<int> session_env;  // test-environment index per session
    std::vector<double> cdf;       // fraction resolved within 1..n trials
    double sls_rate = 0.0;
    double mean_trials = 0.0;
    double mean_elapsed_ms = 0.0;
    double traditional_ms = 0.0;
};

AlignmentResult run_alignment_study(const ScenarioConfig& cfg, const TrainedModels& models,
                                    const GridCrf& model_bs, const GridCrf& model_sec);

struct BlockageStudyResult {
    std::vector<int> additional_trials;  // entry-resolved adjustments only
    int sessions_checked = 0;
    int triggered = 0;
    int sls_adjustments = 0;
    // fractions over all triggered adjustments; SLS recoveries count as misses
    double frac_one_trial = 0.0;
    double frac_within_4 = 0.0;
};

BlockageStudyResult run_blockage_study(const ScenarioConfig& cfg, const TrainedModels& models,
                                       const GridCrf& model_bs, const GridCrf& model_sec);

struct NoiseStudyResult {
    double sigma_bs_db = 0.0;
    double sigma_sec_db = 0.0;
    double bs_flip_fraction = 0.0;
    double sec_flip_fraction = 0.0;
    std::vector<double> w_clean_bs, w_noisy_bs;
    std::vector<double> w_clean_sec, w_noisy_sec;
    // max relative |exp(w_noisy)-exp(w_clean)|/exp(w_clean) over ranks with
    // exp(w_clean) > 0.1
    double max_rel_delta_bs = 0.0;
    double max_rel_delta_sec = 0.0;
};

NoiseStudyResult noise_robustness_study(const ScenarioConfig& cfg, const GridCrf& model_bs,
                                        const GridCrf& model_sec, double bs_flip_target = 0.17,
                                        double sec_flip_target = 0.20);

struct LatencyReport {
    double mean_inferbeam_ms = 0.0;
    double p50_inferbeam_ms = 0.0;
    double p95_inferbeam_ms = 0.0;
    double traditional_ms = 0.0;
    double mean_reduction_pct = 0.0;
};

LatencyReport latency_report(const AlignmentResult& result, const LabelSpace& space,
                             const ProtocolConstants& constants);

// gnuplot-ready CSV and JSON summaries
void write_sessions_csv(std::ostream& os, const AlignmentResult& result);
void write_cdf_csv(std::ostream& os, const AlignmentResult& result);
void write_blockage_csv(std::ostream& os, const BlockageStudyResult& result);
void write_alignment_summary_json(std::ostream& os, const AlignmentResult& result,
                                  const LatencyReport& latency);

}  // namespace inferbeam

#endif

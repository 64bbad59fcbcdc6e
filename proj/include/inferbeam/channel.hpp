#ifndef INFERBEAM_CHANNEL_HPP
#define INFERBEAM_CHANNEL_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "inferbeam/grid.hpp"
#include "inferbeam/labels.hpp"

namespace inferbeam {

struct BaseStation {
    Vec3 position;
    double orientation_rad = 0.0;  // azimuth of sector 0 boresight
};

// Axis-aligned box; treated as closed, so a grazing segment counts as blocked.
struct ObstacleBox {
    Vec3 min_corner;
    Vec3 dims;  // meters, all > 0
    double penetration_db = 30.0;

    Vec3 max_corner() const {
        return {min_corner.x + dims.x, min_corner.y + dims.y, min_corner.z + dims.z};
    }
};

struct ChannelParams {
    // log-distance path loss, d0 = 1 m
    double n_los = 1.2;
    double sigma_los = 1.8;
    double n_nlos = 2.95;
    double sigma_nlos = 10.45;
    double pl_fs_d0_db = 68.0;  // free-space loss at 1 m, 60 GHz

    double tx_power_dbm = 10.0;
    double g_tx_dbi = 0.0;
    double g_rx_dbi = 0.0;

    double p_e = 0.0078;  // blocking probability per meter of link length

    // sector directivity: raised-cosine mainlobe over one sector width each
    // side of boresight, constant sidelobe floor beyond
    double mainlobe_gain_dbi = 0.0;  // <= 0 means derive 10*log10(n_sec)
    double sidelobe_db = -20.0;      // relative to mainlobe

    // decorrelation distance of the shadow field; <= 0 falls back to
    // independent per-node draws
    double shadow_decorrelation_m = 1.0;

    double noise_floor_dbm = -78.0;
};

struct Environment {
    Grid3D grid;
    std::vector<BaseStation> bs_list;
    std::vector<ObstacleBox> obstacles;
    LabelSpace space;
    ChannelParams params;
    std::uint64_t rng_seed = 0;
};

struct NodeTruth {
    BeamTuple best;
    double rx_power_dbm = 0.0;
};

struct GroundTruthField {
    std::vector<NodeTruth> nodes;
};

double path_loss_db(double d_m, bool los, const ChannelParams& params, double shadow_db);

bool segment_intersects_box(const Vec3& p1, const Vec3& p2, const ObstacleBox& box);
bool is_los(const Vec3& p1, const Vec3& p2, const std::vector<ObstacleBox>& obstacles);
// total penetration loss of boxes crossed by the segment
double penetration_loss_db(const Vec3& p1, const Vec3& p2,
                           const std::vector<ObstacleBox>& obstacles);

// directivity relative to the mainlobe peak, in dB (<= 0)
double sector_rolloff_db(double angle_offset_rad, int n_sec, double sidelobe_db);
double sector_gain_dbi(double boresight_rad, double bearing_rad, int n_sec,
                       const ChannelParams& params);

// mean received power over the blocked/clear mixture, closed form; shadow
// draws may be zero for the mean over fading as well
double expected_rx_power_db(int k, double d_m, const ChannelParams& params,
                            double shadow_los_db = 0.0, double shadow_nlos_db = 0.0);

// shadow fading realization, frozen per (seed, node, bs, los-class)
double shadow_draw_db(const Environment& env, NodeIndex node, int bs, bool los);

// received power for one candidate beam at one node under the realized channel
double rx_power_dbm(const Environment& env, NodeIndex node, const BeamTuple& beam);

GroundTruthField sweep_ground_truth(const Environment& env, unsigned n_threads = 1);

struct BlockageResult {
    Environment env;
    GroundTruthField field;
    std::vector<NodeIndex> changed_nodes;
};

BlockageResult add_blockage(const Environment& env, const GroundTruthField& before,
                            const ObstacleBox& obstacle, unsigned n_threads = 1);

enum class LabelKind { bs, sector };

// Ground-truth labels after adding N(0, sigma) dB measurement noise per
// candidate beam (draws frozen by noise_seed).
std::vector<BeamTuple> noisy_truth_labels(const Environment& env, double noise_sigma_db,
                                          std::uint64_t noise_seed);
double label_flip_fraction(const Environment& env, const GroundTruthField& clean,
                           double noise_sigma_db, std::uint64_t noise_seed, LabelKind kind);
// bisection for the noise scale hitting a target flip fraction
double calibrate_noise_sigma(const Environment& env, const GroundTruthField& clean,
                             double target_flip_fraction, std::uint64_t noise_seed,
                             LabelKind kind, int iters = 30);

// environment file round-trip (JSON)
void write_environment(std::ostream& os, const Environment& env);
Environment read_environment(std::istream& is);
void save_environment(const std::string& path, const Environment& env);
Environment load_environment(const std::string& path);

// ground-truth table: node_index bs sec_bs sec_ue rx_power_dbm
void write_ground_truth(std::ostream& os, const GroundTruthField& field);
GroundTruthField read_ground_truth(std::istream& is);

}  // namespace inferbeam

#endif

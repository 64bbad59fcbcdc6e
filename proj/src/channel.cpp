#include "inferbeam/channel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "inferbeam/mathutil.hpp"
#include "json.hpp"

namespace inferbeam {

namespace {

constexpr double kMinDistance = 1.0;  // model valid from d0 = 1 m

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a > M_PI) a -= 2.0 * M_PI;
    if (a < -M_PI) a += 2.0 * M_PI;
    return a;
}

double mainlobe_gain(const ChannelParams& p, int n_sec) {
    return p.mainlobe_gain_dbi > 0.0 ? p.mainlobe_gain_dbi : 10.0 * std::log10(double(n_sec));
}

}  // namespace

double path_loss_db(double d_m, bool los, const ChannelParams& params, double shadow_db) {
    double d = std::max(d_m, kMinDistance);
    double n = los ? params.n_los : params.n_nlos;
    return params.pl_fs_d0_db + 10.0 * n * std::log10(d) + shadow_db;
}

bool segment_intersects_box(const Vec3& p1, const Vec3& p2, const ObstacleBox& box) {
    // slab method on the closed box, parametrized p1 + t*(p2-p1), t in [0,1]
    Vec3 d = p2 - p1;
    Vec3 lo = box.min_corner;
    Vec3 hi = box.max_corner();
    double tmin = 0.0, tmax = 1.0;

    const double p[3] = {p1.x, p1.y, p1.z};
    const double dir[3] = {d.x, d.y, d.z};
    const double bmin[3] = {lo.x, lo.y, lo.z};
    const double bmax[3] = {hi.x, hi.y, hi.z};
    for (int axis = 0; axis < 3; ++axis) {
        if (dir[axis] == 0.0) {
            if (p[axis] < bmin[axis] || p[axis] > bmax[axis]) return false;
        } else {
            double t1 = (bmin[axis] - p[axis]) / dir[axis];
            double t2 = (bmax[axis] - p[axis]) / dir[axis];
            if (t1 > t2) std::swap(t1, t2);
            tmin = std::max(tmin, t1);
            tmax = std::min(tmax, t2);
            if (tmin > tmax) return false;
        }
    }
    return true;
}

bool is_los(const Vec3& p1, const Vec3& p2, const std::vector<ObstacleBox>& obstacles) {
    for (const ObstacleBox& box : obstacles)
        if (segment_intersects_box(p1, p2, box)) return false;
    return true;
}

double penetration_loss_db(const Vec3& p1, const Vec3& p2,
                           const std::vector<ObstacleBox>& obstacles) {
    double total = 0.0;
    for (const ObstacleBox& box : obstacles)
        if (segment_intersects_box(p1, p2, box)) total += box.penetration_db;
    return total;
}

double sector_rolloff_db(double angle_offset_rad, int n_sec, double sidelobe_db) {
    // raised cosine spanning two sector widths, which puts the crossover with
    // the neighboring sector at -3 dB (the sector width is the 3 dB beamwidth)
    double span = 2.0 * (2.0 * M_PI / n_sec);
    double a = std::fabs(wrap_angle(angle_offset_rad));
    if (a >= span) return sidelobe_db;
    return sidelobe_db * (1.0 - 0.5 * (1.0 + std::cos(M_PI * a / span)));
}

double sector_gain_dbi(double boresight_rad, double bearing_rad, int n_sec,
                       const ChannelParams& params) {
    return mainlobe_gain(params, n_sec) +
           sector_rolloff_db(bearing_rad - boresight_rad, n_sec, params.sidelobe_db);
}

double expected_rx_power_db(int k, double d_m, const ChannelParams& params, double shadow_los_db,
                            double shadow_nlos_db) {
    double kd = k * d_m;
    double a = params.tx_power_dbm + params.g_tx_dbi + params.g_rx_dbi - params.pl_fs_d0_db;
    double slope_los = 10.0 * params.n_los;
    double slope_delta = 10.0 * (params.n_nlos - params.n_los);
    double p_blk = params.p_e * kd;
    return a - (slope_delta * p_blk + slope_los) * std::log10(kd) -
           (shadow_nlos_db - shadow_los_db) * p_blk - shadow_los_db;
}

double shadow_draw_db(const Environment& env, NodeIndex node, int bs, bool los) {
    constexpr std::uint64_t kShadowTag = 0x73686164;
    double sigma = los ? env.params.sigma_los : env.params.sigma_nlos;
    std::uint64_t tag = kShadowTag + (los ? 0 : 1);

    double dec = env.params.shadow_decorrelation_m;
    if (dec <= 0.0) {
        std::uint64_t key = hash_combine(env.rng_seed, tag, static_cast<std::uint64_t>(node),
                                         static_cast<std::uint64_t>(bs));
        return sigma * gaussian_from_key(key);
    }

    // correlated field: trilinear blend of unit-Gaussian anchors on a coarse
    // lattice, renormalized so the marginal spread stays exactly sigma
    Vec3 p = env.grid.position_of(node);
    double gx = (p.x - env.grid.origin().x) / dec;
    double gy = (p.y - env.grid.origin().y) / dec;
    double gz = (p.z - env.grid.origin().z) / dec;
    int ix = static_cast<int>(std::floor(gx));
    int iy = static_cast<int>(std::floor(gy));
    int iz = static_cast<int>(std::floor(gz));
    double fx = gx - ix, fy = gy - iy, fz = gz - iz;

    double value = 0.0, wsq = 0.0;
    for (int dx = 0; dx <= 1; ++dx)
        for (int dy = 0; dy <= 1; ++dy)
            for (int dz = 0; dz <= 1; ++dz) {
                double w = (dx ? fx : 1.0 - fx) * (dy ? fy : 1.0 - fy) * (dz ? fz : 1.0 - fz);
                if (w == 0.0) continue;
                std::uint64_t key = hash_combine(
                    hash_combine(env.rng_seed, tag, static_cast<std::uint64_t>(bs)),
                    static_cast<std::uint64_t>(ix + dx) * 0x1f123bb5ULL,
                    static_cast<std::uint64_t>(iy + dy) * 0x5851f42dULL,
                    static_cast<std::uint64_t>(iz + dz) * 0x2545f491ULL);
                value += w * gaussian_from_key(key);
                wsq += w * w;
            }
    return sigma * value / std::sqrt(wsq);
}

namespace {

struct LinkState {
    double distance_m;
    bool los;
    double base_db;  // everything except the sector gains
    double bearing_bs_to_node;
};

LinkState link_state(const Environment& env, NodeIndex node, int bs) {
    const BaseStation& station = env.bs_list[bs];
    Vec3 np = env.grid.position_of(node);
    Vec3 d = np - station.position;
    LinkState s;
    s.distance_m = norm(d);
    s.los = is_los(station.position, np, env.obstacles);
    double shadow = shadow_draw_db(env, node, bs, s.los);
    double pl = path_loss_db(s.distance_m, s.los, env.params, shadow);
    double pen = s.los ? 0.0 : penetration_loss_db(station.position, np, env.obstacles);
    s.base_db = env.params.tx_power_dbm + env.params.g_tx_dbi + env.params.g_rx_dbi - pl - pen;
    s.bearing_bs_to_node = std::atan2(d.y, d.x);
    return s;
}

double beam_power_dbm(const Environment& env, const LinkState& link, const BeamTuple& beam) {
    const LabelSpace& ls = env.space;
    double bs_boresight =
        env.bs_list[beam.bs].orientation_rad + 2.0 * M_PI * beam.sec_bs / ls.n_sec_bs;
    double ue_boresight = 2.0 * M_PI * beam.sec_ue / ls.n_sec_ue;
    double bearing_node_to_bs = link.bearing_bs_to_node + M_PI;
    return link.base_db +
           sector_gain_dbi(bs_boresight, link.bearing_bs_to_node, ls.n_sec_bs, env.params) +
           sector_gain_dbi(ue_boresight, bearing_node_to_bs, ls.n_sec_ue, env.params);
}

NodeTruth sweep_node(const Environment& env, NodeIndex node) {
    const LabelSpace& ls = env.space;
    NodeTruth best;
    bool first = true;
    for (int bs = 0; bs < ls.n_bs; ++bs) {
        LinkState link = link_state(env, node, bs);
        for (int sb = 0; sb < ls.n_sec_bs; ++sb)
            for (int su = 0; su < ls.n_sec_ue; ++su) {
                BeamTuple beam{bs, sb, su};
                double p = beam_power_dbm(env, link, beam);
                // ties go to the smallest beam id; enumeration is ascending
                if (first || p > best.rx_power_dbm) {
                    best = {beam, p};
                    first = false;
                }
            }
    }
    return best;
}

}  // namespace

double rx_power_dbm(const Environment& env, NodeIndex node, const BeamTuple& beam) {
    return beam_power_dbm(env, link_state(env, node, beam.bs), beam);
}

GroundTruthField sweep_ground_truth(const Environment& env, unsigned n_threads) {
    GroundTruthField field;
    field.nodes.resize(env.grid.node_count());
    parallel_for(field.nodes.size(), n_threads,
                 [&](std::size_t v) { field.nodes[v] = sweep_node(env, NodeIndex(v)); });
    return field;
}

BlockageResult add_blockage(const Environment& env, const GroundTruthField& before,
                            const ObstacleBox& obstacle, unsigned n_threads) {
    // footprint must sit on the floor plan; height may exceed the node layers
    Vec3 lo = env.grid.origin();
    Vec3 hi = env.grid.position_of(env.grid.node_count() - 1);
    const Vec3& p = obstacle.min_corner;
    if (p.x < lo.x || p.y < lo.y || p.z < lo.z || p.x > hi.x || p.y > hi.y)
        throw std::invalid_argument("blockage position outside grid bounds");

    BlockageResult result{env, {}, {}};
    result.env.obstacles.push_back(obstacle);
    result.field = sweep_ground_truth(result.env, n_threads);
    for (NodeIndex v = 0; v < env.grid.node_count(); ++v)
        if (!(result.field.nodes[v].best == before.nodes[v].best))
            result.changed_nodes.push_back(v);
    return result;
}

std::vector<BeamTuple> noisy_truth_labels(const Environment& env, double noise_sigma_db,
                                          std::uint64_t noise_seed) {
    const LabelSpace& ls = env.space;
    std::vector<BeamTuple> labels(env.grid.node_count());
    for (NodeIndex v = 0; v < env.grid.node_count(); ++v) {
        BeamTuple best;
        double best_p = 0.0;
        bool first = true;
        for (int bs = 0; bs < ls.n_bs; ++bs) {
            LinkState link = link_state(env, v, bs);
            for (int sb = 0; sb < ls.n_sec_bs; ++sb)
                for (int su = 0; su < ls.n_sec_ue; ++su) {
                    BeamTuple beam{bs, sb, su};
                    std::uint64_t key =
                        hash_combine(noise_seed, static_cast<std::uint64_t>(v),
                                     static_cast<std::uint64_t>(beam_id_of(beam, ls)));
                    double p = beam_power_dbm(env, link, beam) +
                               noise_sigma_db * gaussian_from_key(key);
                    if (first || p > best_p) {
                        best = beam;
                        best_p = p;
                        first = false;
                    }
                }
        }
        labels[v] = best;
    }
    return labels;
}

double label_flip_fraction(const Environment& env, const GroundTruthField& clean,
                           double noise_sigma_db, std::uint64_t noise_seed, LabelKind kind) {
    std::vector<BeamTuple> noisy = noisy_truth_labels(env, noise_sigma_db, noise_seed);
    int flips = 0;
    for (NodeIndex v = 0; v < env.grid.node_count(); ++v) {
        const BeamTuple& a = clean.nodes[v].best;
        const BeamTuple& b = noisy[v];
        bool flip = (kind == LabelKind::bs)
                        ? (a.bs != b.bs)
                        : (sec_id_of(a, env.space) != sec_id_of(b, env.space));
        flips += flip ? 1 : 0;
    }
    return double(flips) / double(env.grid.node_count());
}

double calibrate_noise_sigma(const Environment& env, const GroundTruthField& clean,
                             double target_flip_fraction, std::uint64_t noise_seed,
                             LabelKind kind, int iters) {
    double lo = 0.0, hi = 1.0;
    while (label_flip_fraction(env, clean, hi, noise_seed, kind) < target_flip_fraction &&
           hi < 256.0)
        hi *= 2.0;
    for (int i = 0; i < iters; ++i) {
        double mid = 0.5 * (lo + hi);
        if (label_flip_fraction(env, clean, mid, noise_seed, kind) < target_flip_fraction)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// ---- serialization ----

using nlohmann::json;

namespace {

json vec3_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }
Vec3 vec3_from_json(const json& j) { return {j.at(0), j.at(1), j.at(2)}; }

}  // namespace

void write_environment(std::ostream& os, const Environment& env) {
    json j;
    j["grid"] = {{"dims", {env.grid.dims().x, env.grid.dims().y, env.grid.dims().z}},
                 {"spacing", env.grid.spacing()},
                 {"origin", vec3_to_json(env.grid.origin())}};
    j["bs"] = json::array();
    for (const BaseStation& b : env.bs_list)
        j["bs"].push_back(
            {{"position", vec3_to_json(b.position)}, {"orientation", b.orientation_rad}});
    j["obstacles"] = json::array();
    for (const ObstacleBox& o : env.obstacles)
        j["obstacles"].push_back({{"min_corner", vec3_to_json(o.min_corner)},
                                  {"dims", vec3_to_json(o.dims)},
                                  {"penetration_db", o.penetration_db}});
    j["labels"] = {{"n_bs", env.space.n_bs},
                   {"n_sec_bs", env.space.n_sec_bs},
                   {"n_sec_ue", env.space.n_sec_ue}};
    const ChannelParams& p = env.params;
    j["channel"] = {{"n_los", p.n_los},
                    {"sigma_los", p.sigma_los},
                    {"n_nlos", p.n_nlos},
                    {"sigma_nlos", p.sigma_nlos},
                    {"pl_fs_d0_db", p.pl_fs_d0_db},
                    {"tx_power_dbm", p.tx_power_dbm},
                    {"g_tx_dbi", p.g_tx_dbi},
                    {"g_rx_dbi", p.g_rx_dbi},
                    {"p_e", p.p_e},
                    {"mainlobe_gain_dbi", p.mainlobe_gain_dbi},
                    {"sidelobe_db", p.sidelobe_db},
                    {"noise_floor_dbm", p.noise_floor_dbm}};
    j["seed"] = env.rng_seed;
    os << j.dump(2) << '\n';
}

Environment read_environment(std::istream& is) {
    json j = json::parse(is);
    const json& g = j.at("grid");
    Grid3D grid({g.at("dims").at(0), g.at("dims").at(1), g.at("dims").at(2)}, g.at("spacing"),
                vec3_from_json(g.at("origin")));
    Environment env{std::move(grid), {}, {}, {}, {}, j.at("seed")};
    for (const json& b : j.at("bs"))
        env.bs_list.push_back({vec3_from_json(b.at("position")), b.at("orientation")});
    for (const json& o : j.at("obstacles"))
        env.obstacles.push_back({vec3_from_json(o.at("min_corner")), vec3_from_json(o.at("dims")),
                                 o.at("penetration_db")});
    const json& ls = j.at("labels");
    env.space = {ls.at("n_bs"), ls.at("n_sec_bs"), ls.at("n_sec_ue")};
    const json& c = j.at("channel");
    ChannelParams& p = env.params;
    p.n_los = c.at("n_los");
    p.sigma_los = c.at("sigma_los");
    p.n_nlos = c.at("n_nlos");
    p.sigma_nlos = c.at("sigma_nlos");
    p.pl_fs_d0_db = c.at("pl_fs_d0_db");
    p.tx_power_dbm = c.at("tx_power_dbm");
    p.g_tx_dbi = c.at("g_tx_dbi");
    p.g_rx_dbi = c.at("g_rx_dbi");
    p.p_e = c.at("p_e");
    p.mainlobe_gain_dbi = c.at("mainlobe_gain_dbi");
    p.sidelobe_db = c.at("sidelobe_db");
    p.noise_floor_dbm = c.at("noise_floor_dbm");
    return env;
}

void save_environment(const std::string& path, const Environment& env) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_environment(os, env);
}

Environment load_environment(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_environment(is);
}

void write_ground_truth(std::ostream& os, const GroundTruthField& field) {
    os << "# node bs sec_bs sec_ue rx_power_dbm\n";
    for (std::size_t v = 0; v < field.nodes.size(); ++v) {
        const NodeTruth& t = field.nodes[v];
        os << v << ' ' << t.best.bs << ' ' << t.best.sec_bs << ' ' << t.best.sec_ue << ' '
           << t.rx_power_dbm << '\n';
    }
}

GroundTruthField read_ground_truth(std::istream& is) {
    GroundTruthField field;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::size_t v;
        NodeTruth t;
        ss >> v >> t.best.bs >> t.best.sec_bs >> t.best.sec_ue >> t.rx_power_dbm;
        if (field.nodes.size() <= v) field.nodes.resize(v + 1);
        field.nodes[v] = t;
    }
    return field;
}

}  // namespace inferbeam

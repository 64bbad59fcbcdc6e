// Test-only reference implementations, kept deliberately naive and
// independent of the library code paths they check.
#ifndef INFERBEAM_TEST_ORACLES_HPP
#define INFERBEAM_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "inferbeam/channel.hpp"
#include "inferbeam/crf.hpp"
#include "inferbeam/grid.hpp"
#include "inferbeam/training.hpp"

namespace oracles {

// Gaussian tail probability by adaptive Simpson quadrature of the density,
// no erfc involved.
inline double gauss_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }

inline double simpson(double a, double b) {
    double m = 0.5 * (a + b);
    return (b - a) / 6.0 * (gauss_pdf(a) + 4.0 * gauss_pdf(m) + gauss_pdf(b));
}

inline double adaptive_simpson(double a, double b, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double left = simpson(a, m), right = simpson(m, b);
    if (depth <= 0 || std::fabs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(a, m, left, tol / 2.0, depth - 1) +
           adaptive_simpson(m, b, right, tol / 2.0, depth - 1);
}

inline double q_function(double x) {
    // the density 9 sigmas past max(x, 0) is below 1e-35 of the result
    double upper = std::max(x, 0.0) + 9.0;
    double rough = simpson(x, upper);
    double tol = std::max(1e-18, 1e-12 * std::fabs(rough));
    return adaptive_simpson(x, upper, rough, tol, 48);
}

// p-hop rank by sorting the distinct squared offsets of the whole grid
inline std::optional<int> phop_rank(const inferbeam::Grid3D& grid, inferbeam::NodeIndex a,
                                    inferbeam::NodeIndex b, int max_rank) {
    std::set<long> dists;
    auto da = grid.dims();
    for (int dz = -(da.z - 1); dz <= da.z - 1; ++dz)
        for (int dy = -(da.y - 1); dy <= da.y - 1; ++dy)
            for (int dx = -(da.x - 1); dx <= da.x - 1; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                dists.insert(long(dx) * dx + long(dy) * dy + long(dz) * dz);
            }
    auto ca = grid.coords_of(a), cb = grid.coords_of(b);
    long d2 = long(cb.x - ca.x) * (cb.x - ca.x) + long(cb.y - ca.y) * (cb.y - ca.y) +
              long(cb.z - ca.z) * (cb.z - ca.z);
    if (d2 == 0) return 0;
    int rank = 1;
    for (long d : dists) {
        if (d == d2) return rank <= max_rank ? std::optional<int>(rank) : std::nullopt;
        if (rank++ == max_rank) break;
    }
    return std::nullopt;
}

// brute-force marginals: walk every full labeling, accumulate exp(sum of
// potentials) with sample nodes pinned
struct BruteMarginals {
    std::vector<std::vector<double>> p;
};

inline BruteMarginals brute_marginals(const inferbeam::GridCrf& model,
                                      const inferbeam::Evidence& evidence,
                                      const inferbeam::CrfParams& params) {
    using namespace inferbeam;
    const Grid3D& grid = model.grid();
    int n = grid.node_count();
    int L = model.n_labels();

    std::map<NodeIndex, int> pinned;
    for (auto& [v, lab] : evidence.samples) pinned[v] = lab;

    std::vector<int> labels(n, 0);
    for (auto& [v, lab] : pinned) labels[v] = lab;

    // node-potential table from the definition, ranks resolved up front
    std::vector<std::vector<double>> pot(n, std::vector<double>(L, 0.0));
    for (int v = 0; v < n; ++v)
        for (auto& [s, lab] : evidence.samples) {
            auto r = phop_rank(grid, s, v, model.max_rank());
            if (r && *r >= 1) pot[v][lab] += params.w[*r - 1];
        }

    BruteMarginals out;
    out.p.assign(n, std::vector<double>(L, 0.0));
    double z = 0.0;

    // odometer over non-pinned nodes
    std::vector<int> free;
    for (int v = 0; v < n; ++v)
        if (!pinned.count(v)) free.push_back(v);

    std::vector<int> idx(free.size(), 0);
    for (;;) {
        for (std::size_t i = 0; i < free.size(); ++i) labels[free[i]] = idx[i];
        double logp = 0.0;
        for (int v = 0; v < n; ++v) logp += pot[v][labels[v]];
        const auto& edges = grid.edges();
        for (std::size_t e = 0; e < edges.size(); ++e)
            if (labels[edges[e].u] != labels[edges[e].v]) logp += params.edge_penalty(e);
        double weight = std::exp(logp);
        z += weight;
        for (int v = 0; v < n; ++v) out.p[v][labels[v]] += weight;

        std::size_t i = 0;
        while (i < idx.size() && ++idx[i] == L) idx[i++] = 0;
        if (i == idx.size()) break;
    }
    for (int v = 0; v < n; ++v)
        for (int x = 0; x < L; ++x) out.p[v][x] /= z;
    return out;
}

// all-pairs sufficient statistics by a double loop over nodes
inline inferbeam::SuffStats recount_stats(const inferbeam::GridCrf& model,
                                          const std::vector<int>& labeling) {
    using namespace inferbeam;
    const Grid3D& grid = model.grid();
    SuffStats st;
    st.u.assign(model.max_rank(), 0.0);
    st.edge_disagree.assign(grid.edges().size(), 0.0);
    for (NodeIndex v = 0; v < grid.node_count(); ++v)
        for (NodeIndex s = 0; s < grid.node_count(); ++s) {
            if (s == v || labeling[s] != labeling[v]) continue;
            auto r = phop_rank(grid, v, s, model.max_rank());
            if (r && *r >= 1) st.u[*r - 1] += 1.0;
        }
    const auto& edges = grid.edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
        st.edge_disagree[e] = labeling[edges[e].u] != labeling[edges[e].v] ? 1.0 : 0.0;
    return st;
}

// exact training-model expectations by direct enumeration, recomputing stats
// with the naive recount above
struct BruteExpectations {
    double log_z;
    inferbeam::SuffStats stats;
};

inline BruteExpectations brute_expectations(const inferbeam::GridCrf& model,
                                            const inferbeam::CrfParams& params) {
    using namespace inferbeam;
    int n = model.grid().node_count();
    int L = model.n_labels();
    std::vector<int> labels(n, 0);

    BruteExpectations out;
    out.stats.u.assign(model.max_rank(), 0.0);
    out.stats.edge_disagree.assign(model.grid().edges().size(), 0.0);
    double z = 0.0;
    for (;;) {
        SuffStats st = recount_stats(model, labels);
        double lp = 0.0;
        for (int k = 0; k < model.max_rank(); ++k) lp += params.w[k] * st.u[k];
        for (std::size_t e = 0; e < st.edge_disagree.size(); ++e)
            lp += params.edge_penalty(e) * st.edge_disagree[e];
        double weight = std::exp(lp);
        z += weight;
        for (int k = 0; k < model.max_rank(); ++k) out.stats.u[k] += weight * st.u[k];
        for (std::size_t e = 0; e < st.edge_disagree.size(); ++e)
            out.stats.edge_disagree[e] += weight * st.edge_disagree[e];

        int i = 0;
        while (i < n && ++labels[i] == L) labels[i++] = 0;
        if (i == n) break;
    }
    out.log_z = std::log(z);
    for (double& x : out.stats.u) x /= z;
    for (double& x : out.stats.edge_disagree) x /= z;
    return out;
}

// segment/box test by dense sampling with closed point-in-box checks
inline bool segment_hits_box_sampled(const inferbeam::Vec3& p1, const inferbeam::Vec3& p2,
                                     const inferbeam::ObstacleBox& box, int steps = 20001) {
    inferbeam::Vec3 hi = box.max_corner();
    for (int i = 0; i < steps; ++i) {
        double t = double(i) / (steps - 1);
        double x = p1.x + t * (p2.x - p1.x);
        double y = p1.y + t * (p2.y - p1.y);
        double z = p1.z + t * (p2.z - p1.z);
        if (x >= box.min_corner.x && x <= hi.x && y >= box.min_corner.y && y <= hi.y &&
            z >= box.min_corner.z && z <= hi.z)
            return true;
    }
    return false;
}

// central finite differences of a scalar function of CrfParams
template <typename F>
inline inferbeam::Gradient finite_difference(const inferbeam::CrfParams& theta, F&& f,
                                             double h = 1e-5) {
    inferbeam::Gradient g;
    inferbeam::CrfParams t = theta;
    g.w.resize(theta.w.size());
    for (std::size_t k = 0; k < theta.w.size(); ++k) {
        double orig = t.w[k];
        t.w[k] = orig + h;
        double hi = f(t);
        t.w[k] = orig - h;
        double lo = f(t);
        t.w[k] = orig;
        g.w[k] = (hi - lo) / (2.0 * h);
    }
    g.m.resize(theta.m.size());
    for (std::size_t e = 0; e < theta.m.size(); ++e) {
        double orig = t.m[e];
        t.m[e] = orig + h;
        double hi = f(t);
        t.m[e] = orig - h;
        double lo = f(t);
        t.m[e] = orig;
        g.m[e] = (hi - lo) / (2.0 * h);
    }
    return g;
}

// independent received-power recompute for the sweep oracle
inline double recompute_rx_power(const inferbeam::Environment& env, inferbeam::NodeIndex node,
                                 const inferbeam::BeamTuple& beam) {
    using namespace inferbeam;
    const ChannelParams& cp = env.params;
    Vec3 np = env.grid.position_of(node);
    const BaseStation& bs = env.bs_list[beam.bs];
    double dx = np.x - bs.position.x, dy = np.y - bs.position.y, dz = np.z - bs.position.z;
    double d = std::sqrt(dx * dx + dy * dy + dz * dz);

    bool clear = true;
    double pen = 0.0;
    for (const ObstacleBox& box : env.obstacles)
        if (segment_hits_box_sampled(bs.position, np, box)) {
            clear = false;
            pen += box.penetration_db;
        }

    double shadow = shadow_draw_db(env, node, beam.bs, clear);
    double n_exp = clear ? cp.n_los : cp.n_nlos;
    double pl = cp.pl_fs_d0_db + 10.0 * n_exp * std::log10(std::max(d, 1.0)) + shadow;

    auto wrap = [](double a) {
        a = std::fmod(a, 2.0 * M_PI);
        if (a > M_PI) a -= 2.0 * M_PI;
        if (a < -M_PI) a += 2.0 * M_PI;
        return a;
    };
    auto gain = [&](double boresight, double bearing, int n_sec) {
        double g_main =
            cp.mainlobe_gain_dbi > 0 ? cp.mainlobe_gain_dbi : 10.0 * std::log10(double(n_sec));
        double width = 2.0 * M_PI / n_sec;
        double a = std::fabs(wrap(bearing - boresight));
        double roll = a >= width
                          ? cp.sidelobe_db
                          : cp.sidelobe_db * (1.0 - 0.5 * (1.0 + std::cos(M_PI * a / width)));
        return g_main + roll;
    };
    double bearing_to_node = std::atan2(dy, dx);
    double g_bs = gain(bs.orientation_rad + 2.0 * M_PI * beam.sec_bs / env.space.n_sec_bs,
                       bearing_to_node, env.space.n_sec_bs);
    double g_ue = gain(2.0 * M_PI * beam.sec_ue / env.space.n_sec_ue, bearing_to_node + M_PI,
                       env.space.n_sec_ue);
    return cp.tx_power_dbm + cp.g_tx_dbi + cp.g_rx_dbi + g_bs + g_ue - pl - (clear ? 0.0 : pen);
}

}  // namespace oracles

#endif

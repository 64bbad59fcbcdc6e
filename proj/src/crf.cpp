#include "inferbeam/crf.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace inferbeam {

void write_marginals(std::ostream& os, const MarginalField& field) {
    for (std::size_t v = 0; v < field.p.size(); ++v)
        for (int x = 0; x < field.n_labels; ++x)
            os << v << ' ' << x << ' ' << field.p[v][x] << '\n';
}

GridCrf::GridCrf(const Grid3D& grid, int n_labels, int max_rank)
    : grid_(&grid), phop_(grid.dims(), max_rank), n_labels_(n_labels) {
    if (n_labels < 1) throw std::invalid_argument("label space must be nonempty");

    NodeIndex n = grid.node_count();
    shell_members_.resize(n);
    for (NodeIndex v = 0; v < n; ++v) {
        IVec3 c = grid.coords_of(v);
        for (int k = 1; k <= phop_.max_rank(); ++k)
            for (const IVec3& off : phop_.shell(k)) {
                IVec3 w{c.x + off.x, c.y + off.y, c.z + off.z};
                if (grid.in_bounds(w)) shell_members_[v].emplace_back(grid.index_of(w), k);
            }
    }

    incident_.resize(n);
    const auto& edges = grid.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        incident_[edges[e].u].emplace_back(e, edges[e].v);
        incident_[edges[e].v].emplace_back(e, edges[e].u);
    }
}

std::vector<NodeIndex> GridCrf::shell_of(NodeIndex v, int k) const {
    return shell_nodes(*grid_, phop_, v, k);
}

double node_potential_log(const GridCrf& model, const Evidence& evidence,
                          std::span<const double> w, NodeIndex v, int label) {
    double total = 0.0;
    IVec3 cv = model.grid().coords_of(v);
    for (const auto& [node, lab] : evidence.samples) {
        if (lab != label) continue;
        IVec3 cs = model.grid().coords_of(node);
        auto rank = model.phop().rank_of({cs.x - cv.x, cs.y - cv.y, cs.z - cv.z});
        if (rank && *rank >= 1 && *rank <= static_cast<int>(w.size())) total += w[*rank - 1];
    }
    return total;
}

std::vector<std::vector<double>> evidence_log_potentials(const GridCrf& model,
                                                         const Evidence& evidence,
                                                         std::span<const double> w) {
    std::vector<std::vector<double>> pot(model.grid().node_count(),
                                         std::vector<double>(model.n_labels(), 0.0));
    int max_rank = std::min<int>(static_cast<int>(w.size()), model.max_rank());
    for (const auto& [s, lab] : evidence.samples) {
        for (const auto& [v, k] : model.shell_members(s))
            if (k <= max_rank) pot[v][lab] += w[k - 1];
    }
    return pot;
}

double joint_log_unnorm(const GridCrf& model, const Evidence& evidence, const CrfParams& params,
                        std::span<const int> labeling) {
    if (labeling.size() != static_cast<std::size_t>(model.grid().node_count()))
        throw std::invalid_argument("labeling must cover every node");
    auto pot = evidence_log_potentials(model, evidence, params.w);
    double total = 0.0;
    for (std::size_t v = 0; v < labeling.size(); ++v) total += pot[v][labeling[v]];
    const auto& edges = model.grid().edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
        total += edge_potential_log(labeling[edges[e].u], labeling[edges[e].v],
                                    params.edge_penalty(e));
    return total;
}

namespace {

// odometer over L^n states; visit receives the current state each step
template <typename Visit>
void enumerate_states(std::vector<int>& state, int n_labels, Visit&& visit) {
    std::size_t n = state.size();
    for (;;) {
        visit(state);
        std::size_t i = 0;
        while (i < n && ++state[i] == n_labels) {
            state[i] = 0;
            ++i;
        }
        if (i == n) break;
    }
}

double pow_checked(int base, std::size_t exp, long budget) {
    double states = std::pow(static_cast<double>(base), static_cast<double>(exp));
    if (states > static_cast<double>(budget))
        throw std::runtime_error("state space exceeds enumeration budget");
    return states;
}

}  // namespace

MarginalField infer_marginals_exact(const GridCrf& model, const Evidence& evidence,
                                    const CrfParams& params, long budget) {
    NodeIndex n = model.grid().node_count();
    int L = model.n_labels();

    std::vector<int> labels(n, -1);
    std::vector<bool> clamped(n, false);
    for (const auto& [s, lab] : evidence.samples) {
        labels[s] = lab;
        clamped[s] = true;
    }
    std::vector<NodeIndex> free_nodes;
    for (NodeIndex v = 0; v < n; ++v)
        if (!clamped[v]) free_nodes.push_back(v);

    pow_checked(L, free_nodes.size(), budget);

    auto pot = evidence_log_potentials(model, evidence, params.w);
    const auto& edges = model.grid().edges();
    // edges touching at least one free node; clamped-clamped pairs are constant
    std::vector<std::size_t> live_edges;
    for (std::size_t e = 0; e < edges.size(); ++e)
        if (!clamped[edges[e].u] || !clamped[edges[e].v]) live_edges.push_back(e);

    std::vector<std::vector<LogSumExpAcc>> acc(free_nodes.size(),
                                               std::vector<LogSumExpAcc>(L));
    LogSumExpAcc z;

    std::vector<int> state(free_nodes.size(), 0);
    enumerate_states(state, L, [&](const std::vector<int>& s) {
        for (std::size_t i = 0; i < free_nodes.size(); ++i) labels[free_nodes[i]] = s[i];
        double lp = 0.0;
        for (std::size_t i = 0; i < free_nodes.size(); ++i)
            lp += pot[free_nodes[i]][s[i]];
        for (std::size_t e : live_edges)
            lp += edge_potential_log(labels[edges[e].u], labels[edges[e].v],
                                     params.edge_penalty(e));
        z.add(lp);
        for (std::size_t i = 0; i < free_nodes.size(); ++i) acc[i][s[i]].add(lp);
    });

    MarginalField field;
    field.n_labels = L;
    field.clamped = clamped;
    field.p.assign(n, std::vector<double>(L, 0.0));
    for (const auto& [s, lab] : evidence.samples) field.p[s][lab] = 1.0;
    double log_z = z.value();
    for (std::size_t i = 0; i < free_nodes.size(); ++i) {
        double sum = 0.0;
        for (int x = 0; x < L; ++x) {
            field.p[free_nodes[i]][x] = std::exp(acc[i][x].value() - log_z);
            sum += field.p[free_nodes[i]][x];
        }
        for (int x = 0; x < L; ++x) field.p[free_nodes[i]][x] /= sum;
    }
    return field;
}

namespace {

struct LbpWorkspace {
    // directed message id: 2*e + 0 is edges[e].u -> v, 2*e + 1 the reverse
    std::vector<std::vector<double>> unary;  // linear domain, normalized
    std::vector<double> edge_coef;           // exp(m_e)
    std::vector<std::vector<double>> msg;
    std::vector<std::vector<double>> msg_next;
};

}  // namespace

LbpResult infer_marginals_lbp(const GridCrf& model, const Evidence& evidence,
                              const CrfParams& params, const LbpConfig& cfg) {
    const Grid3D& grid = model.grid();
    const auto& edges = grid.edges();
    NodeIndex n = grid.node_count();
    int L = model.n_labels();

    std::vector<bool> clamped(n, false);
    std::vector<int> clamp_label(n, -1);
    for (const auto& [s, lab] : evidence.samples) {
        clamped[s] = true;
        clamp_label[s] = lab;
    }

    LbpWorkspace ws;
    auto pot = evidence_log_potentials(model, evidence, params.w);
    ws.unary.assign(n, std::vector<double>(L, 0.0));
    for (NodeIndex v = 0; v < n; ++v) {
        if (clamped[v]) {
            ws.unary[v][clamp_label[v]] = 1.0;
            continue;
        }
        double hi = *std::max_element(pot[v].begin(), pot[v].end());
        double sum = 0.0;
        for (int x = 0; x < L; ++x) {
            ws.unary[v][x] = std::exp(pot[v][x] - hi);
            sum += ws.unary[v][x];
        }
        for (int x = 0; x < L; ++x) ws.unary[v][x] /= sum;
    }

    ws.edge_coef.resize(edges.size());
    for (std::size_t e = 0; e < edges.size(); ++e) ws.edge_coef[e] = std::exp(params.edge_penalty(e));

    std::size_t n_msgs = 2 * edges.size();
    ws.msg.assign(n_msgs, std::vector<double>(L, 1.0 / L));
    ws.msg_next = ws.msg;

    // product of incoming messages at `node` excluding the one from `skip`
    auto gather = [&](NodeIndex node, NodeIndex skip, std::vector<double>& out) {
        out = ws.unary[node];
        for (const auto& [e, nb] : model.incident_edges(node)) {
            if (nb == skip) continue;
            // message pointing toward `node`
            const auto& incoming = ws.msg[2 * e + (edges[e].u == node ? 1 : 0)];
            for (int x = 0; x < L; ++x) out[x] *= incoming[x];
        }
    };

    double delta = 0.0;
    int iter = 0;
    for (iter = 1; iter <= cfg.max_iters; ++iter) {
        parallel_for(n_msgs, cfg.n_threads, [&](std::size_t mi) {
            std::size_t e = mi / 2;
            bool forward = (mi % 2) == 0;
            NodeIndex from = forward ? edges[e].u : edges[e].v;
            NodeIndex to = forward ? edges[e].v : edges[e].u;

            std::vector<double> pre(L);
            gather(from, to, pre);
            double s = 0.0;
            for (int x = 0; x < L; ++x) s += pre[x];
            double c = ws.edge_coef[e];
            auto& out = ws.msg_next[mi];
            double norm = 0.0;
            for (int x = 0; x < L; ++x) {
                // Potts factor: agreement keeps pre, disagreement scales by c
                out[x] = c * (s - pre[x]) + pre[x];
                norm += out[x];
            }
            for (int x = 0; x < L; ++x) {
                out[x] /= norm;
                out[x] = cfg.damping * ws.msg[mi][x] + (1.0 - cfg.damping) * out[x];
            }
        });

        delta = 0.0;
        for (std::size_t mi = 0; mi < n_msgs; ++mi)
            for (int x = 0; x < L; ++x)
                delta = std::max(delta, std::fabs(ws.msg_next[mi][x] - ws.msg[mi][x]));
        ws.msg.swap(ws.msg_next);
        if (delta < cfg.tol) break;
    }

    LbpResult result;
    result.converged = delta < cfg.tol;
    result.iters = std::min(iter, cfg.max_iters);
    result.field.n_labels = L;
    result.field.clamped = clamped;
    result.field.p.assign(n, std::vector<double>(L, 0.0));
    for (NodeIndex v = 0; v < n; ++v) {
        if (clamped[v]) {
            result.field.p[v][clamp_label[v]] = 1.0;
            continue;
        }
        std::vector<double> belief(L);
        gather(v, -1, belief);
        double sum = 0.0;
        for (int x = 0; x < L; ++x) sum += belief[x];
        for (int x = 0; x < L; ++x) result.field.p[v][x] = belief[x] / sum;
    }
    return result;
}

SuffStats stats_of_labeling(const GridCrf& model, std::span<const int> labeling, StatsMode mode,
                            const Evidence& evidence) {
    SuffStats st;
    st.u.assign(model.max_rank(), 0.0);
    st.edge_disagree.assign(model.grid().edges().size(), 0.0);

    if (mode == StatsMode::all_pairs) {
        for (NodeIndex v = 0; v < model.grid().node_count(); ++v) {
            int lv = labeling[v];
            for (const auto& [u, k] : model.shell_members(v))
                if (labeling[u] == lv) st.u[k - 1] += 1.0;
        }
    } else {
        for (const auto& [s, lab] : evidence.samples)
            for (const auto& [v, k] : model.shell_members(s))
                if (labeling[v] == lab) st.u[k - 1] += 1.0;
    }

    const auto& edges = model.grid().edges();
    for (std::size_t e = 0; e < edges.size(); ++e)
        st.edge_disagree[e] = labeling[edges[e].u] != labeling[edges[e].v] ? 1.0 : 0.0;
    return st;
}

namespace {

// One full-sweep single-site Gibbs update in node-index order.
void gibbs_sweep(const GridCrf& model, const CrfParams& params, StatsMode mode,
                 const std::vector<std::vector<double>>& evidence_pot,
                 const std::vector<bool>& clamped, std::vector<int>& state, Rng& rng,
                 std::vector<double>& logit, std::vector<double>& prob) {
    int L = model.n_labels();
    const std::vector<double>& w = params.w;

    for (NodeIndex v = 0; v < model.grid().node_count(); ++v) {
        if (!clamped.empty() && clamped[v]) continue;

        std::fill(logit.begin(), logit.end(), 0.0);
        if (mode == StatsMode::all_pairs) {
            // the rank-k agreement statistic counts (v,u) and (u,v), hence 2w
            for (const auto& [u, k] : model.shell_members(v)) logit[state[u]] += 2.0 * w[k - 1];
        } else {
            for (int x = 0; x < L; ++x) logit[x] = evidence_pot[v][x];
        }
        double base = 0.0;
        for (const auto& [e, nb] : model.incident_edges(v)) {
            double m = params.edge_penalty(e);
            base += m;
            logit[state[nb]] -= m;
        }
        double hi = base + *std::max_element(logit.begin(), logit.end());
        double total = 0.0;
        for (int x = 0; x < L; ++x) {
            prob[x] = std::exp(base + logit[x] - hi);
            total += prob[x];
        }
        double r = rng.uniform01() * total;
        int pick = L - 1;
        double cum = 0.0;
        for (int x = 0; x < L; ++x) {
            cum += prob[x];
            if (r <= cum) {
                pick = x;
                break;
            }
        }
        state[v] = pick;
    }
}

void accumulate(SuffStats& into, const SuffStats& from) {
    for (std::size_t i = 0; i < into.u.size(); ++i) into.u[i] += from.u[i];
    for (std::size_t i = 0; i < into.edge_disagree.size(); ++i)
        into.edge_disagree[i] += from.edge_disagree[i];
}

void scale(SuffStats& st, double f) {
    for (double& x : st.u) x *= f;
    for (double& x : st.edge_disagree) x *= f;
}

}  // namespace

GibbsEngine::GibbsEngine(const GridCrf& model, StatsMode mode, const Evidence& evidence,
                         const GibbsConfig& cfg)
    : model_(&model), mode_(mode), evidence_(evidence), cfg_(cfg) {
    if (cfg.n_sweeps <= cfg.burn_in)
        throw std::invalid_argument("gibbs sweeps must exceed burn-in");
    NodeIndex n = model.grid().node_count();
    for (int c = 0; c < cfg.n_chains; ++c) {
        chain_rng_.emplace_back(hash_combine(cfg.seed, 0x67696273ULL, c));
        std::vector<int> state(n);
        for (NodeIndex v = 0; v < n; ++v)
            state[v] = static_cast<int>(chain_rng_.back().uniform_int(model.n_labels()));
        if (mode == StatsMode::clamped)
            for (const auto& [s, lab] : evidence_.samples) state[s] = lab;
        chain_states_.push_back(std::move(state));
    }
}

void GibbsEngine::init_chains_from(const std::vector<std::vector<int>>& labelings) {
    if (labelings.empty()) return;
    for (std::size_t c = 0; c < chain_states_.size(); ++c) {
        chain_states_[c] = labelings[c % labelings.size()];
        if (mode_ == StatsMode::clamped)
            for (const auto& [s, lab] : evidence_.samples) chain_states_[c][s] = lab;
    }
}

GibbsResult GibbsEngine::step(const CrfParams& params, int n_sweeps_override) {
    const GridCrf& model = *model_;
    NodeIndex n = model.grid().node_count();
    std::vector<bool> clamped;
    std::vector<std::vector<double>> evidence_pot;
    if (mode_ == StatsMode::clamped) {
        clamped.assign(n, false);
        for (const auto& [s, lab] : evidence_.samples) clamped[s] = true;
        evidence_pot = evidence_log_potentials(model, evidence_, params.w);
    }

    int collect_sweeps =
        n_sweeps_override > 0 ? n_sweeps_override : cfg_.n_sweeps - cfg_.burn_in;
    int warmup = warmed_up_ ? 0 : cfg_.burn_in;

    GibbsResult result;
    result.per_chain.resize(cfg_.n_chains);

    parallel_for(cfg_.n_chains, cfg_.n_threads, [&](std::size_t c) {
        std::vector<double> logit(model.n_labels()), prob(model.n_labels());
        SuffStats acc;
        acc.u.assign(model.max_rank(), 0.0);
        acc.edge_disagree.assign(model.grid().edges().size(), 0.0);
        for (int s = 0; s < warmup; ++s)
            gibbs_sweep(model, params, mode_, evidence_pot, clamped, chain_states_[c],
                        chain_rng_[c], logit, prob);
        for (int s = 0; s < collect_sweeps; ++s) {
            gibbs_sweep(model, params, mode_, evidence_pot, clamped, chain_states_[c],
                        chain_rng_[c], logit, prob);
            accumulate(acc, stats_of_labeling(model, chain_states_[c], mode_, evidence_));
        }
        scale(acc, 1.0 / collect_sweeps);
        result.per_chain[c] = std::move(acc);
    });
    warmed_up_ = true;

    result.mean.u.assign(model.max_rank(), 0.0);
    result.mean.edge_disagree.assign(model.grid().edges().size(), 0.0);
    for (const SuffStats& st : result.per_chain) accumulate(result.mean, st);
    scale(result.mean, 1.0 / cfg_.n_chains);
    return result;
}

GibbsResult gibbs_expectations(const GridCrf& model, const CrfParams& params, StatsMode mode,
                               const Evidence& evidence, const GibbsConfig& cfg) {
    GibbsEngine engine(model, mode, evidence, cfg);
    return engine.step(params);
}

MarginalField gibbs_marginals(const GridCrf& model, const Evidence& evidence,
                              const CrfParams& params, const GibbsConfig& cfg) {
    if (cfg.n_sweeps <= cfg.burn_in)
        throw std::invalid_argument("gibbs sweeps must exceed burn-in");
    NodeIndex n = model.grid().node_count();
    int L = model.n_labels();

    std::vector<bool> clamped(n, false);
    std::vector<int> clamp_label(n, -1);
    for (const auto& [s, lab] : evidence.samples) {
        clamped[s] = true;
        clamp_label[s] = lab;
    }
    auto evidence_pot = evidence_log_potentials(model, evidence, params.w);

    // Warm starts: random inits on smoothed models need very long burn-in to
    // find the clamped basin, so chains start from evidence-Voronoi labelings.
    // Chains beyond the first jitter the evidence distances, landing them in
    // neighboring basins so the visit counts mix alternative explanations.
    auto warm_start = [&](int chain) {
        std::vector<int> state(n, 0);
        if (evidence.samples.empty()) return state;
        std::vector<double> scale(evidence.samples.size(), 1.0);
        if (chain > 0)
            for (std::size_t s = 0; s < scale.size(); ++s)
                scale[s] = std::exp(cfg.warm_jitter *
                                    gaussian_from_key(hash_combine(
                                        cfg.seed, 0x77617270ULL, chain, s)));
        for (NodeIndex v = 0; v < n; ++v) {
            double best = std::numeric_limits<double>::max();
            for (std::size_t s = 0; s < evidence.samples.size(); ++s) {
                double d = scale[s] * model.grid().distance_m(v, evidence.samples[s].first);
                if (d < best) {
                    best = d;
                    state[v] = evidence.samples[s].second;
                }
            }
        }
        return state;
    };

    int collect = cfg.n_sweeps - cfg.burn_in;
    std::vector<std::vector<std::int64_t>> counts(cfg.n_chains);
    parallel_for(cfg.n_chains, cfg.n_threads, [&](std::size_t c) {
        Rng rng(hash_combine(cfg.seed, 0x6d617267ULL, c));
        std::vector<int> state = warm_start(static_cast<int>(c));
        for (NodeIndex v = 0; v < n; ++v)
            if (clamped[v]) state[v] = clamp_label[v];
        std::vector<double> logit(L), prob(L);
        for (int s = 0; s < cfg.burn_in; ++s)
            gibbs_sweep(model, params, StatsMode::clamped, evidence_pot, clamped, state, rng,
                        logit, prob);
        auto& tally = counts[c];
        tally.assign(std::size_t(n) * L, 0);
        for (int s = 0; s < collect; ++s) {
            gibbs_sweep(model, params, StatsMode::clamped, evidence_pot, clamped, state, rng,
                        logit, prob);
            for (NodeIndex v = 0; v < n; ++v) ++tally[std::size_t(v) * L + state[v]];
        }
    });

    MarginalField field;
    field.n_labels = L;
    field.clamped = clamped;
    field.p.assign(n, std::vector<double>(L, 0.0));
    double total = double(collect) * cfg.n_chains;
    for (NodeIndex v = 0; v < n; ++v) {
        if (clamped[v]) {
            field.p[v][clamp_label[v]] = 1.0;
            continue;
        }
        for (int x = 0; x < L; ++x) {
            std::int64_t sum = 0;
            for (int c = 0; c < cfg.n_chains; ++c) sum += counts[c][std::size_t(v) * L + x];
            field.p[v][x] = double(sum) / total;
        }
    }
    return field;
}

ExactExpectations exact_expectations(const GridCrf& model, const CrfParams& params, long budget) {
    NodeIndex n = model.grid().node_count();
    int L = model.n_labels();
    pow_checked(L, n, budget);

    auto log_score = [&](const SuffStats& st) {
        double lp = 0.0;
        for (int k = 0; k < model.max_rank(); ++k) lp += params.w[k] * st.u[k];
        for (std::size_t e = 0; e < st.edge_disagree.size(); ++e)
            lp += params.edge_penalty(e) * st.edge_disagree[e];
        return lp;
    };

    // two passes: log Z first, then probability-weighted statistics
    LogSumExpAcc z;
    std::vector<int> state(n, 0);
    enumerate_states(state, L, [&](const std::vector<int>& s) {
        z.add(log_score(stats_of_labeling(model, s, StatsMode::all_pairs)));
    });

    ExactExpectations out;
    out.log_z = z.value();
    out.stats.u.assign(model.max_rank(), 0.0);
    out.stats.edge_disagree.assign(model.grid().edges().size(), 0.0);
    std::fill(state.begin(), state.end(), 0);
    enumerate_states(state, L, [&](const std::vector<int>& s) {
        SuffStats st = stats_of_labeling(model, s, StatsMode::all_pairs);
        double p = std::exp(log_score(st) - out.log_z);
        for (int k = 0; k < model.max_rank(); ++k) out.stats.u[k] += p * st.u[k];
        for (std::size_t e = 0; e < st.edge_disagree.size(); ++e)
            out.stats.edge_disagree[e] += p * st.edge_disagree[e];
    });
    return out;
}

StateStatsTable::StateStatsTable(const GridCrf& model, long budget) {
    n_labels_ = model.n_labels();
    n_ranks_ = model.max_rank();
    n_edges_ = model.grid().edges().size();
    if (n_edges_ > 64) throw std::invalid_argument("state table supports at most 64 edges");
    NodeIndex n = model.grid().node_count();
    double states = pow_checked(n_labels_, n, budget);
    n_states_ = static_cast<std::size_t>(states);

    u_.reserve(n_states_ * n_ranks_);
    edge_mask_.reserve(n_states_);
    std::vector<int> state(n, 0);
    enumerate_states(state, n_labels_, [&](const std::vector<int>& s) {
        SuffStats st = stats_of_labeling(model, s, StatsMode::all_pairs);
        for (int k = 0; k < n_ranks_; ++k) u_.push_back(static_cast<std::int16_t>(st.u[k]));
        std::uint64_t mask = 0;
        for (std::size_t e = 0; e < n_edges_; ++e)
            if (st.edge_disagree[e] > 0.5) mask |= (1ULL << e);
        edge_mask_.push_back(mask);
    });
}

double StateStatsTable::log_z(const CrfParams& params) const {
    LogSumExpAcc z;
    for (std::size_t s = 0; s < n_states_; ++s) {
        double lp = 0.0;
        for (int k = 0; k < n_ranks_; ++k) lp += params.w[k] * u_[s * n_ranks_ + k];
        std::uint64_t mask = edge_mask_[s];
        while (mask) {
            int e = std::countr_zero(mask);
            lp += params.edge_penalty(e);
            mask &= mask - 1;
        }
        z.add(lp);
    }
    return z.value();
}

ExactExpectations StateStatsTable::expectations(const CrfParams& params) const {
    ExactExpectations out;
    out.log_z = log_z(params);
    out.stats.u.assign(n_ranks_, 0.0);
    out.stats.edge_disagree.assign(n_edges_, 0.0);
    for (std::size_t s = 0; s < n_states_; ++s) {
        double lp = 0.0;
        for (int k = 0; k < n_ranks_; ++k) lp += params.w[k] * u_[s * n_ranks_ + k];
        std::uint64_t mask = edge_mask_[s];
        while (mask) {
            int e = std::countr_zero(mask);
            lp += params.edge_penalty(e);
            mask &= mask - 1;
        }
        double p = std::exp(lp - out.log_z);
        for (int k = 0; k < n_ranks_; ++k) out.stats.u[k] += p * u_[s * n_ranks_ + k];
        mask = edge_mask_[s];
        while (mask) {
            int e = std::countr_zero(mask);
            out.stats.edge_disagree[e] += p;
            mask &= mask - 1;
        }
    }
    return out;
}

}  // namespace inferbeam

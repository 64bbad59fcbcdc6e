#ifndef INFERBEAM_CRF_HPP
#define INFERBEAM_CRF_HPP

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "inferbeam/grid.hpp"
#include "inferbeam/mathutil.hpp"

namespace inferbeam {

struct GaussianPrior {
    std::vector<double> mu_w;     // per rank
    std::vector<double> sigma_w;  // per rank, > 0
    double mu_m = 0.0;
    double sigma_m = 1.0;
};

// theta = {w_1..w_K, m_vv'}. Edge penalties are stored per edge, or as a
// single shared value in tied mode.
struct CrfParams {
    std::vector<double> w;
    std::vector<double> m;  // size 1 if tied_m, else one per grid edge
    bool tied_m = false;
    GaussianPrior prior;

    int max_rank() const { return static_cast<int>(w.size()); }
    double edge_penalty(std::size_t e) const { return tied_m ? m[0] : m[e]; }
    std::size_t param_count(std::size_t n_edges) const {
        return w.size() + (tied_m ? 1 : n_edges);
    }
};

// clamped ground-truth labels at sample nodes
struct Evidence {
    std::vector<std::pair<NodeIndex, int>> samples;
};

struct MarginalField {
    int n_labels = 0;
    std::vector<std::vector<double>> p;  // node -> distribution over labels
    std::vector<bool> clamped;
};

// node_index label probability, one line per (node, label)
void write_marginals(std::ostream& os, const MarginalField& field);

// Grid-shaped pairwise model over a discrete label space. Owns the p-hop
// table; parameters and evidence are passed per call.
class GridCrf {
  public:
    GridCrf(const Grid3D& grid, int n_labels, int max_rank);

    const Grid3D& grid() const { return *grid_; }
    const PHopTable& phop() const { return phop_; }
    int n_labels() const { return n_labels_; }
    int max_rank() const { return phop_.max_rank(); }

    // offsets of rank k clipped to bounds around v, as node indices
    std::vector<NodeIndex> shell_of(NodeIndex v, int k) const;

    // in-bounds (neighbor, rank) pairs over every shell up to max_rank
    const std::vector<std::pair<NodeIndex, int>>& shell_members(NodeIndex v) const {
        return shell_members_[v];
    }
    // (edge index, neighbor) pairs incident to v
    const std::vector<std::pair<std::size_t, NodeIndex>>& incident_edges(NodeIndex v) const {
        return incident_[v];
    }

  private:
    const Grid3D* grid_;
    PHopTable phop_;
    int n_labels_;
    std::vector<std::vector<std::pair<NodeIndex, int>>> shell_members_;
    std::vector<std::vector<std::pair<std::size_t, NodeIndex>>> incident_;
};

double node_potential_log(const GridCrf& model, const Evidence& evidence,
                          std::span<const double> w, NodeIndex v, int label);

// m_vv' on label disagreement, 0 on agreement
inline double edge_potential_log(int label_a, int label_b, double m) {
    return label_a != label_b ? m : 0.0;
}

// per-node, per-label evidence potentials (log domain)
std::vector<std::vector<double>> evidence_log_potentials(const GridCrf& model,
                                                         const Evidence& evidence,
                                                         std::span<const double> w);

// unnormalized log probability of a complete labeling
double joint_log_unnorm(const GridCrf& model, const Evidence& evidence, const CrfParams& params,
                        std::span<const int> labeling);

inline constexpr long kDefaultEnumBudget = 2'000'000;

// Exact marginals by enumeration over free nodes; throws if the free state
// space exceeds the budget.
MarginalField infer_marginals_exact(const GridCrf& model, const Evidence& evidence,
                                    const CrfParams& params, long budget = kDefaultEnumBudget);

struct LbpConfig {
    double damping = 0.5;
    double tol = 1e-6;
    int max_iters = 200;
    unsigned n_threads = 1;
};

struct LbpResult {
    MarginalField field;
    bool converged = false;
    int iters = 0;
};

// Sum-product loopy BP with a flooding schedule and double-buffered messages.
LbpResult infer_marginals_lbp(const GridCrf& model, const Evidence& evidence,
                              const CrfParams& params, const LbpConfig& cfg = {});

// Sufficient statistics of the joint: u[k-1] counts label agreement over
// ordered node/sample pairs at rank k; edge_disagree is the per-edge
// disagreement indicator.
struct SuffStats {
    std::vector<double> u;
    std::vector<double> edge_disagree;
};

// Which pairs the rank-k agreement statistic ranges over: every node pair at
// rank k (the training-time joint, where each labeled node acts as a sample),
// or node/sample pairs with the sample set clamped.
enum class StatsMode { all_pairs, clamped };

SuffStats stats_of_labeling(const GridCrf& model, std::span<const int> labeling, StatsMode mode,
                            const Evidence& evidence = {});

struct GibbsConfig {
    int n_chains = 8;
    int n_sweeps = 500;
    int burn_in = 100;
    std::uint64_t seed = 0;
    unsigned n_threads = 1;
    // warm-start spread for gibbs_marginals chains (log-normal distance jitter)
    double warm_jitter = 0.6;
};

struct GibbsResult {
    SuffStats mean;
    std::vector<SuffStats> per_chain;  // for Monte-Carlo standard errors
};

GibbsResult gibbs_expectations(const GridCrf& model, const CrfParams& params, StatsMode mode,
                               const Evidence& evidence, const GibbsConfig& cfg);

// Marginals as clamped-chain visit frequencies. Unlike loopy BP these cannot
// over-concentrate past the posterior, and every plausible label keeps at
// least one count's worth of probability.
MarginalField gibbs_marginals(const GridCrf& model, const Evidence& evidence,
                              const CrfParams& params, const GibbsConfig& cfg);

// Persistent-chain Gibbs engine: chains survive across calls so a training
// loop can reuse warm states with a short thin interval per gradient step.
class GibbsEngine {
  public:
    GibbsEngine(const GridCrf& model, StatsMode mode, const Evidence& evidence,
                const GibbsConfig& cfg);

    // seed chain states from given labelings (round-robin) instead of the
    // default uniform-random start
    void init_chains_from(const std::vector<std::vector<int>>& labelings);

    // advances every chain and returns fresh expectation estimates
    GibbsResult step(const CrfParams& params, int n_sweeps_override = -1);

  private:
    const GridCrf* model_;
    StatsMode mode_;
    Evidence evidence_;
    GibbsConfig cfg_;
    std::vector<std::vector<int>> chain_states_;
    std::vector<Rng> chain_rng_;
    bool warmed_up_ = false;
};

// Exhaustive-enumeration expectations of the training-time joint; also yields
// log Z. Only valid when |X|^n fits the budget.
struct ExactExpectations {
    double log_z;
    SuffStats stats;
};

ExactExpectations exact_expectations(const GridCrf& model, const CrfParams& params,
                                     long budget = kDefaultEnumBudget);

// Precomputed per-state sufficient statistics for repeated exact evaluations
// at different parameters (fits small test grids only).
class StateStatsTable {
  public:
    StateStatsTable(const GridCrf& model, long budget = kDefaultEnumBudget);

    double log_z(const CrfParams& params) const;
    ExactExpectations expectations(const CrfParams& params) const;
    std::size_t state_count() const { return n_states_; }

  private:
    int n_labels_;
    int n_ranks_;
    std::size_t n_edges_;
    std::size_t n_states_;
    std::vector<std::int16_t> u_;           // n_states x n_ranks
    std::vector<std::uint64_t> edge_mask_;  // n_states, bit e = disagreement
};

}  // namespace inferbeam

#endif

#ifndef INFERBEAM_TRAINING_HPP
#define INFERBEAM_TRAINING_HPP

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "inferbeam/crf.hpp"

namespace inferbeam {

// R complete labelings of the grid (one per training environment)
struct TrainingSet {
    std::vector<std::vector<int>> labelings;

    int count() const { return static_cast<int>(labelings.size()); }
};

struct TrainConfig {
    double eta = 0.05;
    double delta = 1e-4;
    int max_iters = 500;

    enum class Engine { exact, gibbs } engine = Engine::exact;
    long enum_budget = kDefaultEnumBudget;
    GibbsConfig gibbs;
    // warm chains across iterations with this many sweeps per gradient step
    bool persistent_chains = false;
    int sweeps_per_iter = 0;  // 0 -> cfg.gibbs.n_sweeps - burn_in
    // start persistent chains at training labelings; random-start chains on
    // strongly smoothed models can sit in a disordered phase for a long time
    bool chains_from_data = true;

    // initial-parameter shape used by offline_train
    bool tied_m = false;
    double prior_sigma_w = 1.0;
    double prior_sigma_m = 1.0;
};

// E_D[u_k] and per-edge E_D[disagreement], averaged over the R labelings;
// every labeled node acts as a sample (all-pairs statistics).
SuffStats empirical_stats(const TrainingSet& data, const GridCrf& model);

// 1/R log posterior up to additive constants; exact Z via enumeration.
double log_posterior(const GridCrf& model, const CrfParams& theta, const SuffStats& empirical,
                     int r_count, long budget = kDefaultEnumBudget);
// same, but reusing a precomputed per-state table
double log_posterior(const StateStatsTable& table, const GridCrf& model, const CrfParams& theta,
                     const SuffStats& empirical, int r_count);

// prior contribution shared by both log_posterior overloads
double log_prior_term(const GridCrf& model, const CrfParams& theta, int r_count);

struct Gradient {
    std::vector<double> w;
    std::vector<double> m;  // layout matches CrfParams::m (tied -> size 1)
};

Gradient gradient_from_stats(const GridCrf& model, const CrfParams& theta,
                             const SuffStats& empirical, const SuffStats& model_stats,
                             int r_count);
// convenience: computes model expectations with the configured engine
Gradient gradient(const GridCrf& model, const CrfParams& theta, const SuffStats& empirical,
                  int r_count, const TrainConfig& cfg);

struct TrainResult {
    CrfParams params;
    int iters = 0;
    bool converged = false;
};

TrainResult gradient_ascent(const CrfParams& theta0, const TrainingSet& data,
                            const GridCrf& model, const TrainConfig& cfg);

enum class MuMForm { difference, quotient };

struct PriorMeans {
    std::vector<double> mu_w;
    double mu_m = 0.0;
};

// Analytic prior means from the two-station race: mu_w_k sums log Gaussian
// tail probabilities of one LOS link beating another over the shared shadow
// spread; mu_m contrasts the k=2 and k=1 cases.
PriorMeans prior_means(int max_rank, double sigma_shadow = 1.8, double los_slope_db = 12.0,
                       MuMForm form = MuMForm::difference);

// theta0 seeded from prior means, zero edge penalties start at mu_m
CrfParams default_initial_params(const GridCrf& model, int max_rank, bool tied_m,
                                 double sigma_w = 1.0, double sigma_m = 1.0);

// Ranks whose weight multiplier exp(w_k) falls to the floor carry no usable
// evidence; drop them from the node potentials (w_k -> 0).
CrfParams truncate_negligible_ranks(CrfParams params, double exp_w_floor = 0.1);

// trains the BS-label model and the sector-tuple model
std::pair<TrainResult, TrainResult> offline_train(const TrainingSet& data_bs,
                                                  const TrainingSet& data_sec,
                                                  const GridCrf& model_bs,
                                                  const GridCrf& model_sec,
                                                  const TrainConfig& cfg);

// checkpoint file: versioned text header, w vector, tied flag, edge penalties,
// prior block
void write_params(std::ostream& os, const CrfParams& params);
CrfParams read_params(std::istream& is);
void save_params(const std::string& path, const CrfParams& params);
CrfParams load_params(const std::string& path);

}  // namespace inferbeam

#endif

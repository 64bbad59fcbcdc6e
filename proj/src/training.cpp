#include "inferbeam/training.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "inferbeam/mathutil.hpp"

namespace inferbeam {

SuffStats empirical_stats(const TrainingSet& data, const GridCrf& model) {
    if (data.labelings.empty()) throw std::invalid_argument("empty training set");
    SuffStats acc;
    acc.u.assign(model.max_rank(), 0.0);
    acc.edge_disagree.assign(model.grid().edges().size(), 0.0);
    for (const auto& labeling : data.labelings) {
        if (labeling.size() != static_cast<std::size_t>(model.grid().node_count()))
            throw std::invalid_argument("training labeling does not cover the grid");
        SuffStats st = stats_of_labeling(model, labeling, StatsMode::all_pairs);
        for (std::size_t k = 0; k < acc.u.size(); ++k) acc.u[k] += st.u[k];
        for (std::size_t e = 0; e < acc.edge_disagree.size(); ++e)
            acc.edge_disagree[e] += st.edge_disagree[e];
    }
    double inv = 1.0 / data.count();
    for (double& x : acc.u) x *= inv;
    for (double& x : acc.edge_disagree) x *= inv;
    return acc;
}

double log_prior_term(const GridCrf& model, const CrfParams& theta, int r_count) {
    const GaussianPrior& prior = theta.prior;
    double r = r_count > 0 ? double(r_count) : 1.0;  // R=0: likelihood-free prior
    double lp = 0.0;
    for (int k = 0; k < theta.max_rank(); ++k) {
        double d = theta.w[k] - prior.mu_w[k];
        lp -= d * d / (2.0 * r * prior.sigma_w[k] * prior.sigma_w[k]);
    }
    std::size_t n_edges = model.grid().edges().size();
    for (std::size_t e = 0; e < n_edges; ++e) {
        double d = theta.edge_penalty(e) - prior.mu_m;
        lp -= d * d / (2.0 * r * prior.sigma_m * prior.sigma_m);
    }
    return lp;
}

namespace {

double data_term(const GridCrf& model, const CrfParams& theta, const SuffStats& empirical) {
    double lp = 0.0;
    for (int k = 0; k < theta.max_rank(); ++k) lp += theta.w[k] * empirical.u[k];
    for (std::size_t e = 0; e < empirical.edge_disagree.size(); ++e)
        lp += theta.edge_penalty(e) * empirical.edge_disagree[e];
    return lp;
}

}  // namespace

double log_posterior(const GridCrf& model, const CrfParams& theta, const SuffStats& empirical,
                     int r_count, long budget) {
    double lp = log_prior_term(model, theta, r_count);
    if (r_count > 0)
        lp += data_term(model, theta, empirical) - exact_expectations(model, theta, budget).log_z;
    return lp;
}

double log_posterior(const StateStatsTable& table, const GridCrf& model, const CrfParams& theta,
                     const SuffStats& empirical, int r_count) {
    double lp = log_prior_term(model, theta, r_count);
    if (r_count > 0) lp += data_term(model, theta, empirical) - table.log_z(theta);
    return lp;
}

Gradient gradient_from_stats(const GridCrf& model, const CrfParams& theta,
                             const SuffStats& empirical, const SuffStats& model_stats,
                             int r_count) {
    const GaussianPrior& prior = theta.prior;
    double r = r_count > 0 ? double(r_count) : 1.0;
    Gradient g;
    g.w.resize(theta.max_rank());
    for (int k = 0; k < theta.max_rank(); ++k) {
        g.w[k] = empirical.u[k] - model_stats.u[k] +
                 (prior.mu_w[k] - theta.w[k]) / (r * prior.sigma_w[k] * prior.sigma_w[k]);
    }
    std::size_t n_edges = model.grid().edges().size();
    double sigma_m2 = prior.sigma_m * prior.sigma_m;
    if (theta.tied_m) {
        double sum = 0.0;
        for (std::size_t e = 0; e < n_edges; ++e) {
            sum += empirical.edge_disagree[e] - model_stats.edge_disagree[e] +
                   (prior.mu_m - theta.m[0]) / (r * sigma_m2);
        }
        g.m.assign(1, sum);
    } else {
        g.m.resize(n_edges);
        for (std::size_t e = 0; e < n_edges; ++e)
            g.m[e] = empirical.edge_disagree[e] - model_stats.edge_disagree[e] +
                     (prior.mu_m - theta.m[e]) / (r * sigma_m2);
    }
    return g;
}

Gradient gradient(const GridCrf& model, const CrfParams& theta, const SuffStats& empirical,
                  int r_count, const TrainConfig& cfg) {
    SuffStats model_stats;
    if (cfg.engine == TrainConfig::Engine::exact) {
        model_stats = exact_expectations(model, theta, cfg.enum_budget).stats;
    } else {
        model_stats = gibbs_expectations(model, theta, StatsMode::all_pairs, {}, cfg.gibbs).mean;
    }
    return gradient_from_stats(model, theta, empirical, model_stats, r_count);
}

TrainResult gradient_ascent(const CrfParams& theta0, const TrainingSet& data,
                            const GridCrf& model, const TrainConfig& cfg) {
    if (cfg.eta <= 0.0 || cfg.delta < 0.0 || cfg.max_iters < 1)
        throw std::invalid_argument("invalid training config");

    SuffStats empirical = empirical_stats(data, model);
    int r_count = data.count();

    std::optional<StateStatsTable> table;
    std::optional<GibbsEngine> chains;
    if (cfg.engine == TrainConfig::Engine::exact) {
        table.emplace(model, cfg.enum_budget);
    } else if (cfg.persistent_chains) {
        chains.emplace(model, StatsMode::all_pairs, Evidence{}, cfg.gibbs);
        if (cfg.chains_from_data) chains->init_chains_from(data.labelings);
    }

    TrainResult result;
    result.params = theta0;
    std::deque<double> norm_window;
    double first_norm = 0.0;

    for (int iter = 1; iter <= cfg.max_iters; ++iter) {
        SuffStats model_stats;
        if (table) {
            model_stats = table->expectations(result.params).stats;
        } else if (chains) {
            model_stats = chains->step(result.params, cfg.sweeps_per_iter).mean;
        } else {
            GibbsConfig gc = cfg.gibbs;
            gc.seed = hash_combine(cfg.gibbs.seed, static_cast<std::uint64_t>(iter));
            model_stats =
                gibbs_expectations(model, result.params, StatsMode::all_pairs, {}, gc).mean;
        }
        Gradient g =
            gradient_from_stats(model, result.params, empirical, model_stats, r_count);

        double norm = 0.0;
        double max_step = 0.0;
        for (int k = 0; k < result.params.max_rank(); ++k) {
            double step = cfg.eta * g.w[k];
            result.params.w[k] += step;
            max_step = std::max(max_step, std::fabs(step));
            norm += g.w[k] * g.w[k];
        }
        for (std::size_t e = 0; e < result.params.m.size(); ++e) {
            double step = cfg.eta * g.m[e];
            result.params.m[e] += step;
            max_step = std::max(max_step, std::fabs(step));
            norm += g.m[e] * g.m[e];
        }
        norm = std::sqrt(norm);
        if (!std::isfinite(norm))
            throw std::runtime_error("gradient ascent diverged to a non-finite gradient (eta=" +
                                     std::to_string(cfg.eta) + ")");

        if (iter == 1) first_norm = norm;
        norm_window.push_back(norm);
        if (norm_window.size() > 20) norm_window.pop_front();
        // growth relative to the window, above the starting scale; small-norm
        // wobble near convergence is not divergence
        if (norm_window.size() == 20 && norm > 10.0 * norm_window.front() &&
            norm > 10.0 * first_norm && norm_window.front() > 0.0) {
            std::ostringstream msg;
            msg << "gradient ascent diverging: |g| grew from " << norm_window.front() << " to "
                << norm << " over 20 iterations (eta=" << cfg.eta << ")";
            throw std::runtime_error(msg.str());
        }

        result.iters = iter;
        if (max_step <= cfg.delta) {
            result.converged = true;
            break;
        }
    }
    return result;
}

PriorMeans prior_means(int max_rank, double sigma_shadow, double los_slope_db, MuMForm form) {
    if (max_rank < 2) throw std::invalid_argument("prior means need max_rank >= 2");
    // the difference of two i.i.d. LOS shadow draws has spread sigma*sqrt(2)
    double denom = sigma_shadow * std::sqrt(2.0);
    auto log_q_win = [&](int k) {
        double total = 0.0;
        for (int k2 = 1; k2 <= max_rank; ++k2) {
            if (k2 == k) continue;
            total += std::log(q_function(los_slope_db * std::log10(double(k) / k2) / denom));
        }
        return total;
    };
    PriorMeans pm;
    pm.mu_w.resize(max_rank);
    for (int k = 1; k <= max_rank; ++k) pm.mu_w[k - 1] = log_q_win(k);
    pm.mu_m = form == MuMForm::difference ? pm.mu_w[1] - pm.mu_w[0] : pm.mu_w[1] / pm.mu_w[0];
    return pm;
}

CrfParams default_initial_params(const GridCrf& model, int max_rank, bool tied_m, double sigma_w,
                                 double sigma_m) {
    PriorMeans pm = prior_means(max_rank);
    CrfParams params;
    params.w = pm.mu_w;
    params.tied_m = tied_m;
    params.m.assign(tied_m ? 1 : model.grid().edges().size(), pm.mu_m);
    params.prior.mu_w = pm.mu_w;
    params.prior.sigma_w.assign(max_rank, sigma_w);
    params.prior.mu_m = pm.mu_m;
    params.prior.sigma_m = sigma_m;
    return params;
}

CrfParams truncate_negligible_ranks(CrfParams params, double exp_w_floor) {
    for (double& w : params.w)
        if (std::exp(w) <= exp_w_floor) w = 0.0;
    return params;
}

std::pair<TrainResult, TrainResult> offline_train(const TrainingSet& data_bs,
                                                  const TrainingSet& data_sec,
                                                  const GridCrf& model_bs,
                                                  const GridCrf& model_sec,
                                                  const TrainConfig& cfg) {
    CrfParams theta0_bs = default_initial_params(model_bs, model_bs.max_rank(), cfg.tied_m,
                                                 cfg.prior_sigma_w, cfg.prior_sigma_m);
    CrfParams theta0_sec = default_initial_params(model_sec, model_sec.max_rank(), cfg.tied_m,
                                                  cfg.prior_sigma_w, cfg.prior_sigma_m);
    return {gradient_ascent(theta0_bs, data_bs, model_bs, cfg),
            gradient_ascent(theta0_sec, data_sec, model_sec, cfg)};
}

void write_params(std::ostream& os, const CrfParams& params) {
    os << "inferbeam-theta 1\n";
    os << "ranks " << params.max_rank() << '\n';
    os << "w";
    os.precision(17);
    for (double x : params.w) os << ' ' << x;
    os << '\n';
    os << "tied " << (params.tied_m ? 1 : 0) << '\n';
    os << "m " << params.m.size();
    for (double x : params.m) os << ' ' << x;
    os << '\n';
    os << "prior_mu_w";
    for (double x : params.prior.mu_w) os << ' ' << x;
    os << '\n';
    os << "prior_sigma_w";
    for (double x : params.prior.sigma_w) os << ' ' << x;
    os << '\n';
    os << "prior_m " << params.prior.mu_m << ' ' << params.prior.sigma_m << '\n';
}

CrfParams read_params(std::istream& is) {
    std::string magic;
    int version;
    is >> magic >> version;
    if (magic != "inferbeam-theta" || version != 1)
        throw std::runtime_error("unrecognized parameter file header");
    CrfParams params;
    std::string key;
    int ranks = 0;
    is >> key >> ranks;
    if (key != "ranks" || ranks < 1) throw std::runtime_error("bad ranks line");
    params.w.resize(ranks);
    is >> key;
    for (double& x : params.w) is >> x;
    int tied;
    is >> key >> tied;
    params.tied_m = tied != 0;
    std::size_t m_count;
    is >> key >> m_count;
    params.m.resize(m_count);
    for (double& x : params.m) is >> x;
    params.prior.mu_w.resize(ranks);
    is >> key;
    for (double& x : params.prior.mu_w) is >> x;
    params.prior.sigma_w.resize(ranks);
    is >> key;
    for (double& x : params.prior.sigma_w) is >> x;
    is >> key >> params.prior.mu_m >> params.prior.sigma_m;
    if (!is) throw std::runtime_error("truncated parameter file");
    return params;
}

void save_params(const std::string& path, const CrfParams& params) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    write_params(os, params);
}

CrfParams load_params(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read " + path);
    return read_params(is);
}

}  // namespace inferbeam

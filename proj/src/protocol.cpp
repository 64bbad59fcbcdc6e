#include "inferbeam/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace inferbeam {

void write_event_log(std::ostream& os, const EventLog& log) {
    static const char* names[] = {"locate", "frame", "ack", "miss", "sls", "brp", "reconnect"};
    os << "t_ms,kind,entry_rank,bs,sec_bs,sec_ue\n";
    for (const EventRecord& e : log.events)
        os << e.t_ms << ',' << names[e.kind] << ',' << e.entry_rank << ',' << e.beam.bs << ','
           << e.beam.sec_bs << ',' << e.beam.sec_ue << '\n';
}

MarginalField infer_marginals(const GridCrf& model, const Evidence& evidence,
                              const CrfParams& params, const InferenceConfig& cfg) {
    if (cfg.engine == InferenceConfig::Engine::exact)
        return infer_marginals_exact(model, evidence, params, cfg.enum_budget);
    if (cfg.engine == InferenceConfig::Engine::gibbs)
        return gibbs_marginals(model, evidence, params, cfg.gibbs);
    if (cfg.engine == InferenceConfig::Engine::auto_select) {
        std::size_t free_nodes = model.grid().node_count() - evidence.samples.size();
        double states = std::pow(double(model.n_labels()), double(free_nodes));
        if (states <= double(cfg.enum_budget))
            return infer_marginals_exact(model, evidence, params, cfg.enum_budget);
    }
    return infer_marginals_lbp(model, evidence, params, cfg.lbp).field;
}

BeamSelectionMap bia(const SampleSet& samples, const CrfParams& theta_bs,
                     const CrfParams& theta_sec, const GridCrf& model_bs,
                     const GridCrf& model_sec, const LabelSpace& space,
                     const InferenceConfig& cfg) {
    if (samples.empty()) throw std::invalid_argument("inference requires a nonempty sample set");
    NodeIndex n = model_bs.grid().node_count();

    Evidence bs_evidence;
    for (const Sample& s : samples.samples())
        bs_evidence.samples.emplace_back(s.node, s.truth.bs);
    InferenceConfig cfg_bs = cfg;
    cfg_bs.gibbs.seed = hash_combine(cfg.gibbs.seed, 0x626961ULL, 0);
    if (cfg.gibbs_bs_chains > 0) cfg_bs.gibbs.n_chains = cfg.gibbs_bs_chains;
    MarginalField p_bs = infer_marginals(model_bs, bs_evidence, theta_bs, cfg_bs);

    // conditional sector fields, one per BS label
    std::vector<MarginalField> p_sec(space.n_bs);
    for (int x = 0; x < space.n_bs; ++x) {
        Evidence sec_evidence;
        for (const Sample& s : samples.samples())
            if (s.truth.bs == x) sec_evidence.samples.emplace_back(s.node, sec_id_of(s.truth, space));
        if (sec_evidence.samples.empty()) {
            // zero-evidence limit of the model: uniform over sector tuples
            MarginalField uniform;
            uniform.n_labels = space.n_sec();
            uniform.clamped.assign(n, false);
            uniform.p.assign(n, std::vector<double>(space.n_sec(), 1.0 / space.n_sec()));
            p_sec[x] = std::move(uniform);
        } else {
            InferenceConfig cfg_x = cfg;
            cfg_x.gibbs.seed = hash_combine(cfg.gibbs.seed, 0x626961ULL, x + 1);
            if (cfg.gibbs_sec_jitter > 0.0) cfg_x.gibbs.warm_jitter = cfg.gibbs_sec_jitter;
            p_sec[x] = infer_marginals(model_sec, sec_evidence, theta_sec, cfg_x);
        }
    }

    BeamSelectionMap map;
    map.space = space;
    map.entries.resize(n);
    for (NodeIndex v = 0; v < n; ++v) {
        auto& entries = map.entries[v];
        entries.reserve(space.n_beams());
        for (int x = 0; x < space.n_bs; ++x)
            for (int y = 0; y < space.n_sec(); ++y) {
                BeamTuple t = tuple_of(x, y, space);
                entries.push_back({t.bs, t.sec_bs, t.sec_ue, p_bs.p[v][x] * p_sec[x].p[v][y]});
            }
        sort_map(entries);
    }
    return map;
}

InferBeamState::InferBeamState(const GridCrf& model_bs, const GridCrf& model_sec,
                               const LabelSpace& space, CrfParams theta_bs, CrfParams theta_sec,
                               SampleSet samples, InferenceConfig inference,
                               ProtocolConstants constants)
    : model_bs_(&model_bs),
      model_sec_(&model_sec),
      space_(space),
      theta_bs_(std::move(theta_bs)),
      theta_sec_(std::move(theta_sec)),
      samples_(std::move(samples)),
      inference_(std::move(inference)),
      constants_(constants) {
    reinfer();
}

void InferBeamState::reinfer() {
    map_ = bia(samples_, theta_bs_, theta_sec_, *model_bs_, *model_sec_, space_, inference_);
}

void InferBeamState::update_with_erasure(const Sample& fresh) {
    double radius =
        constants_.beta_in_cells ? constants_.beta * grid().spacing() : constants_.beta;
    samples_.remove_within(grid(), fresh.node, radius);
    samples_.add_or_replace(fresh);
    reinfer();
}

bool entry_matches_truth(const BeamEntry& entry, const BeamTuple& truth, const LabelSpace& space,
                         const ProtocolConstants& constants) {
    return entry.bs == truth.bs &&
           sector_distance(entry.sec_bs, truth.sec_bs, space.n_sec_bs) <= constants.xi_bs &&
           sector_distance(entry.sec_ue, truth.sec_ue, space.n_sec_ue) <= constants.xi_ue;
}

BeamTuple sls_sweep(const Environment& env, const GroundTruthField& field,
                    const Vec3& ue_location) {
    return field.nodes[env.grid.nearest_node(ue_location)].best;
}

namespace {

void log_event(EventLog* log, double t, EventRecord::Kind kind, int rank = -1,
               BeamTuple beam = {}) {
    if (log) log->events.push_back({t, kind, rank, beam});
}

struct ScanOutcome {
    int trials = 0;
    bool matched = false;
    int matched_rank = -1;
    BeamTuple matched_entry;
};

// Walks sorted entries above the threshold until one finds the truth.
// skip_entry (when set) models a removed in-use entry.
ScanOutcome scan_entries(const std::vector<BeamEntry>& entries, const BeamTuple& truth,
                         const LabelSpace& space, const ProtocolConstants& constants,
                         const std::optional<BeamTuple>& skip_entry, double& t_ms,
                         EventLog* log) {
    ScanOutcome out;
    for (std::size_t rank = 0; rank < entries.size(); ++rank) {
        const BeamEntry& f = entries[rank];
        if (!(f.probability > constants.p_th)) break;  // sorted: the rest are below too
        BeamTuple candidate{f.bs, f.sec_bs, f.sec_ue};
        if (skip_entry && candidate == *skip_entry) continue;
        ++out.trials;
        t_ms += 2.0 * constants.t_frame_ms;  // beacon plus reply window
        log_event(log, t_ms, EventRecord::frame, int(rank), candidate);
        if (entry_matches_truth(f, truth, space, constants)) {
            out.matched = true;
            out.matched_rank = int(rank);
            out.matched_entry = candidate;
            log_event(log, t_ms, EventRecord::ack, int(rank), candidate);
            break;
        }
        log_event(log, t_ms, EventRecord::miss, int(rank), candidate);
    }
    return out;
}

}  // namespace

UeSession obp(InferBeamState& state, const Environment& env, const GroundTruthField& field,
              const Vec3& true_location, const Vec3& reported_location, EventLog* log) {
    const ProtocolConstants& constants = state.constants();
    const LabelSpace& space = state.space();

    UeSession session;
    session.true_location = true_location;
    session.reported_location = reported_location;
    session.true_node = env.grid.nearest_node(true_location);
    session.reported_node = env.grid.nearest_node(reported_location);

    double t = 0.0;
    t += constants.t_loc_ms;
    log_event(log, t, EventRecord::locate);

    const BeamTuple truth = field.nodes[session.true_node].best;
    const auto& entries = state.map().entries[session.reported_node];

    ScanOutcome scan =
        scan_entries(entries, truth, space, constants, std::nullopt, t, log);
    session.trials = scan.trials;
    session.beacon_exchanges = scan.trials;

    if (scan.matched) {
        session.resolved_by_entry = true;
        session.matched_rank = scan.matched_rank;
        session.matched_entry = scan.matched_entry;
    } else {
        session.sls_used = true;
        session.beacon_exchanges += space.n_sec_bs + space.n_sec_ue;
        t += (space.n_sec_bs + space.n_sec_ue) * constants.t_frame_ms;
        log_event(log, t, EventRecord::sls);
        session.matched_entry = truth;
    }
    session.final_beam = truth;  // BRP lands on the optimum within the coarse set

    t += constants.t_brp_ms;
    log_event(log, t, EventRecord::brp, -1, session.final_beam);
    session.elapsed_ms = t;

    if (session.sls_used && constants.maintain_samples) {
        Sample fresh{session.reported_node, truth,
                     env.grid.position_of(session.reported_node)};
        state.update_with_erasure(fresh);
    }
    return session;
}

double throughput_mbps(double rx_power_dbm, const ChannelParams& params) {
    double snr_db = rx_power_dbm - params.noise_floor_dbm;
    // monotone rate ladder, Shannon-capped well under 2.16 GHz of bandwidth
    static const double snr_step[] = {1, 4, 7, 10, 13, 16, 19, 22, 25};
    static const double rate[] = {385, 770, 1155, 1540, 1925, 2310, 2695, 3080, 3850};
    double mbps = 0.0;
    for (int i = 0; i < 9; ++i)
        if (snr_db >= snr_step[i]) mbps = rate[i];
    return mbps;
}

ObapResult obap(const InferBeamState& state, const UeSession& session,
                const Environment& env_now, const GroundTruthField& field_now, EventLog* log) {
    const ProtocolConstants& constants = state.constants();
    const LabelSpace& space = state.space();

    ObapResult result;
    double rx = rx_power_dbm(env_now, session.true_node, session.final_beam);
    if (throughput_mbps(rx, env_now.params) >= constants.alpha_th_mbps) return result;

    result.triggered = true;
    double t = 0.0;
    t += constants.control_latency_ms;  // reconnection request over Wi-Fi
    log_event(log, t, EventRecord::reconnect);

    const BeamTuple truth = field_now.nodes[session.true_node].best;
    const auto& entries = state.map().entries[session.reported_node];

    ScanOutcome scan = scan_entries(entries, truth, space, constants,
                                    std::optional<BeamTuple>(session.matched_entry), t, log);
    result.additional_trials = scan.trials;
    result.beacon_exchanges = scan.trials;
    if (!scan.matched) {
        result.sls_used = true;
        result.beacon_exchanges += space.n_sec_bs + space.n_sec_ue;
        t += (space.n_sec_bs + space.n_sec_ue) * constants.t_frame_ms;
        log_event(log, t, EventRecord::sls);
    }
    result.new_beam = truth;
    t += constants.t_brp_ms;
    log_event(log, t, EventRecord::brp, -1, truth);
    result.elapsed_ms = t;
    return result;
}

double traditional_elapsed_ms(const LabelSpace& space, const ProtocolConstants& constants) {
    return constants.t_beacon_ms + (space.n_sec_bs + space.n_sec_ue) * constants.t_frame_ms +
           constants.t_brp_ms;
}

}  // namespace inferbeam

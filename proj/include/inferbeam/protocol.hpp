#ifndef INFERBEAM_PROTOCOL_HPP
#define INFERBEAM_PROTOCOL_HPP

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "inferbeam/channel.hpp"
#include "inferbeam/crf.hpp"
#include "inferbeam/grid.hpp"
#include "inferbeam/labels.hpp"

namespace inferbeam {

struct ProtocolConstants {
    int xi_bs = 1;
    int xi_ue = 1;
    double p_th = 1e-6;
    double beta = 5.0;          // erasure radius around an SLS-corrected sample
    bool beta_in_cells = true;  // interpret beta in grid cells rather than meters
    double alpha_th_mbps = 1000.0;

    double t_frame_ms = 1.0;
    double t_beacon_ms = 100.0;
    double t_brp_ms = 2.0;
    double t_loc_ms = 10.0;
    double control_latency_ms = 1.0;  // Wi-Fi reconnection signalling
    double rtt_ms = 2.0;

    // Alg-5 sample maintenance; accuracy studies probe a frozen map instead
    bool maintain_samples = true;
};

struct EventRecord {
    double t_ms = 0.0;
    enum Kind { locate, frame, ack, miss, sls, brp, reconnect } kind = frame;
    int entry_rank = -1;
    BeamTuple beam;
};

struct EventLog {
    std::vector<EventRecord> events;
};

// timestamp kind entry_rank bs sec_bs sec_ue, CSV
void write_event_log(std::ostream& os, const EventLog& log);

struct InferenceConfig {
    enum class Engine { exact, lbp, gibbs, auto_select } engine = Engine::auto_select;
    long enum_budget = kDefaultEnumBudget;
    LbpConfig lbp;
    GibbsConfig gibbs{2, 350, 50, 0, 1};
    // the station field has few labels, so extra chains are nearly free and
    // sharpen its vote granularity; 0 keeps the shared chain count
    int gibbs_bs_chains = 0;
    // wider warm-start spread for the sparse per-station sector fields;
    // 0 keeps the shared jitter
    double gibbs_sec_jitter = 0.0;
};

// marginals with the engine picked by config (auto: exact when it fits)
MarginalField infer_marginals(const GridCrf& model, const Evidence& evidence,
                              const CrfParams& params, const InferenceConfig& cfg);

// Cascaded inference: BS marginals from BS evidence, per-BS sector marginals
// from the matching evidence subset, joint probability per (bs, sector pair),
// sorted descending per node. Sector models with no evidence for a BS fall
// back to uniform conditionals.
BeamSelectionMap bia(const SampleSet& samples, const CrfParams& theta_bs,
                     const CrfParams& theta_sec, const GridCrf& model_bs,
                     const GridCrf& model_sec, const LabelSpace& space,
                     const InferenceConfig& cfg);

// Runtime bundle: trained parameters, current samples, cached sorted map.
// Mutating the sample set re-runs inference to keep the map consistent.
class InferBeamState {
  public:
    InferBeamState(const GridCrf& model_bs, const GridCrf& model_sec, const LabelSpace& space,
                   CrfParams theta_bs, CrfParams theta_sec, SampleSet samples,
                   InferenceConfig inference, ProtocolConstants constants);

    const BeamSelectionMap& map() const { return map_; }
    const SampleSet& samples() const { return samples_; }
    const ProtocolConstants& constants() const { return constants_; }
    const LabelSpace& space() const { return space_; }
    const Grid3D& grid() const { return model_bs_->grid(); }

    // appends an SLS-corrected sample, erases stale samples within beta,
    // re-runs inference
    void update_with_erasure(const Sample& fresh);

  private:
    const GridCrf* model_bs_;
    const GridCrf* model_sec_;
    LabelSpace space_;
    CrfParams theta_bs_, theta_sec_;
    SampleSet samples_;
    InferenceConfig inference_;
    ProtocolConstants constants_;
    BeamSelectionMap map_;

    void reinfer();
};

struct UeSession {
    Vec3 true_location;
    Vec3 reported_location;
    NodeIndex true_node = -1;
    NodeIndex reported_node = -1;

    int trials = 0;
    int beacon_exchanges = 0;  // trials, plus the sweep frames when SLS ran
    bool sls_used = false;
    bool resolved_by_entry = false;
    int matched_rank = -1;
    BeamTuple matched_entry;
    BeamTuple final_beam;
    double elapsed_ms = 0.0;
};

// whether a map entry finds the ground-truth beam under the sector tolerance
bool entry_matches_truth(const BeamEntry& entry, const BeamTuple& truth, const LabelSpace& space,
                         const ProtocolConstants& constants);

// exhaustive sweep: exact by construction, charged at full sweep cost
BeamTuple sls_sweep(const Environment& env, const GroundTruthField& field,
                    const Vec3& ue_location);

// Online alignment against the current map: walks the sorted entries above
// the probability threshold, falls back to SLS, always ends with BRP.
UeSession obp(InferBeamState& state, const Environment& env, const GroundTruthField& field,
              const Vec3& true_location, const Vec3& reported_location,
              EventLog* log = nullptr);

double throughput_mbps(double rx_power_dbm, const ChannelParams& params);

struct ObapResult {
    bool triggered = false;
    int additional_trials = 0;
    int beacon_exchanges = 0;
    bool sls_used = false;
    BeamTuple new_beam;
    double elapsed_ms = 0.0;
};

// Beam adjustment after an environment change: if measured throughput fell
// below the threshold, drop the in-use entry and rescan without relocating.
ObapResult obap(const InferBeamState& state, const UeSession& session,
                const Environment& env_now, const GroundTruthField& field_now,
                EventLog* log = nullptr);

// elapsed time of the sweep-based scheme for the same label space
double traditional_elapsed_ms(const LabelSpace& space, const ProtocolConstants& constants);

}  // namespace inferbeam

#endif

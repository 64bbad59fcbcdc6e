#ifndef INFERBEAM_LABELS_HPP
#define INFERBEAM_LABELS_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "inferbeam/grid.hpp"

namespace inferbeam {

// BS ids, circular sector ids and their flat encodings. Sector ids follow
// physical azimuth order: sector s points at azimuth orientation + 2*pi*s/n.
struct LabelSpace {
    int n_bs = 1;
    int n_sec_bs = 1;
    int n_sec_ue = 1;

    int n_sec() const { return n_sec_bs * n_sec_ue; }
    int n_beams() const { return n_bs * n_sec(); }
};

struct BeamTuple {
    int bs = 0;
    int sec_bs = 0;
    int sec_ue = 0;

    bool operator==(const BeamTuple&) const = default;
    auto operator<=>(const BeamTuple&) const = default;
};

inline int sec_id_of(const BeamTuple& t, const LabelSpace& ls) {
    return t.sec_bs * ls.n_sec_ue + t.sec_ue;
}
inline int beam_id_of(const BeamTuple& t, const LabelSpace& ls) {
    return t.bs * ls.n_sec() + sec_id_of(t, ls);
}
inline BeamTuple tuple_of_beam_id(int beam_id, const LabelSpace& ls) {
    int sec = beam_id % ls.n_sec();
    return {beam_id / ls.n_sec(), sec / ls.n_sec_ue, sec % ls.n_sec_ue};
}
inline BeamTuple tuple_of(int bs, int sec_id, const LabelSpace& ls) {
    return {bs, sec_id / ls.n_sec_ue, sec_id % ls.n_sec_ue};
}

// circular sector arithmetic
int sector_add(int sec, int delta, int n_sec);
// the 2*xi+1 consecutive sectors centered on sec
std::vector<int> sector_range(int sec, int xi, int n_sec);
// shortest circular distance between two sector ids
int sector_distance(int a, int b, int n_sec);

struct BeamEntry {
    int bs = 0;
    int sec_bs = 0;
    int sec_ue = 0;
    double probability = 0.0;
};

struct BeamSelectionMap {
    LabelSpace space;
    // per node, entries over (bs, sector pair); sorted descending once built
    std::vector<std::vector<BeamEntry>> entries;
};

// Stable descending sort on probability; ties by (bs, sec_bs, sec_ue).
void sort_map(std::vector<BeamEntry>& node_entries);
void sort_map(BeamSelectionMap& map);

// node_index rank bs sec_bs sec_ue probability, one line per entry
void write_beam_map(std::ostream& os, const BeamSelectionMap& map);

struct Sample {
    NodeIndex node = 0;
    BeamTuple truth;
    Vec3 location;
};

class SampleSet {
  public:
    SampleSet() = default;

    // rejects duplicate nodes
    void add(const Sample& s);
    // replaces the label if the node is already sampled
    void add_or_replace(const Sample& s);
    void remove_within(const Grid3D& grid, NodeIndex center, double radius_m);

    bool contains(NodeIndex v) const;
    const std::vector<Sample>& samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }

  private:
    std::vector<Sample> samples_;
};

}  // namespace inferbeam

#endif

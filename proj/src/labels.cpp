#include "inferbeam/labels.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace inferbeam {

int sector_add(int sec, int delta, int n_sec) {
    int r = (sec + delta) % n_sec;
    if (r < 0) r += n_sec;
    return r;
}

std::vector<int> sector_range(int sec, int xi, int n_sec) {
    if (xi < 0 || 2 * xi >= n_sec)
        throw std::invalid_argument("sector range parameter must satisfy 0 <= xi < n_sec/2");
    std::vector<int> out;
    out.reserve(2 * xi + 1);
    for (int d = -xi; d <= xi; ++d) out.push_back(sector_add(sec, d, n_sec));
    return out;
}

int sector_distance(int a, int b, int n_sec) {
    int d = sector_add(a, -b, n_sec);
    return std::min(d, n_sec - d);
}

void sort_map(std::vector<BeamEntry>& node_entries) {
    std::stable_sort(node_entries.begin(), node_entries.end(),
                     [](const BeamEntry& a, const BeamEntry& b) {
                         if (a.probability != b.probability) return a.probability > b.probability;
                         return std::tie(a.bs, a.sec_bs, a.sec_ue) <
                                std::tie(b.bs, b.sec_bs, b.sec_ue);
                     });
}

void sort_map(BeamSelectionMap& map) {
    for (auto& node_entries : map.entries) sort_map(node_entries);
}

void write_beam_map(std::ostream& os, const BeamSelectionMap& map) {
    for (std::size_t v = 0; v < map.entries.size(); ++v) {
        int rank = 0;
        for (const BeamEntry& e : map.entries[v]) {
            os << v << ' ' << rank++ << ' ' << e.bs << ' ' << e.sec_bs << ' ' << e.sec_ue << ' '
               << e.probability << '\n';
        }
    }
}

void SampleSet::add(const Sample& s) {
    if (contains(s.node)) throw std::invalid_argument("duplicate sample node");
    samples_.push_back(s);
}

void SampleSet::add_or_replace(const Sample& s) {
    for (auto& existing : samples_) {
        if (existing.node == s.node) {
            existing = s;
            return;
        }
    }
    samples_.push_back(s);
}

void SampleSet::remove_within(const Grid3D& grid, NodeIndex center, double radius_m) {
    std::erase_if(samples_, [&](const Sample& s) {
        return s.node != center && grid.distance_m(s.node, center) < radius_m;
    });
}

bool SampleSet::contains(NodeIndex v) const {
    return std::any_of(samples_.begin(), samples_.end(),
                       [v](const Sample& s) { return s.node == v; });
}

}  // namespace inferbeam

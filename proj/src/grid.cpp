#include "inferbeam/grid.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace inferbeam {

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Grid3D::Grid3D(IVec3 dims, double spacing, Vec3 origin)
    : dims_(dims), spacing_(spacing), origin_(origin) {
    if (dims.x < 1 || dims.y < 1 || dims.z < 1)
        throw std::invalid_argument("grid dims must be >= 1");
    if (!(spacing > 0.0)) throw std::invalid_argument("grid spacing must be > 0");
    n_nodes_ = static_cast<NodeIndex>(dims.x) * dims.y * dims.z;

    edges_.reserve(static_cast<std::size_t>(n_nodes_) * 3);
    for (NodeIndex v = 0; v < n_nodes_; ++v) {
        IVec3 c = coords_of(v);
        const IVec3 steps[3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
        for (const IVec3& s : steps) {
            IVec3 n{c.x + s.x, c.y + s.y, c.z + s.z};
            if (in_bounds(n)) edges_.push_back({v, index_of(n)});
        }
    }
}

NodeIndex Grid3D::nearest_node(const Vec3& p) const {
    auto snap = [&](double w, double o, int n) {
        long i = std::llround((w - o) / spacing_);
        return static_cast<int>(std::clamp<long>(i, 0, n - 1));
    };
    return index_of({snap(p.x, origin_.x, dims_.x), snap(p.y, origin_.y, dims_.y),
                     snap(p.z, origin_.z, dims_.z)});
}

double Grid3D::distance_m(NodeIndex a, NodeIndex b) const {
    return norm(position_of(a) - position_of(b));
}

std::vector<NodeIndex> Grid3D::neighbors(NodeIndex v) const {
    std::vector<NodeIndex> out;
    IVec3 c = coords_of(v);
    const IVec3 steps[6] = {{0, 0, -1}, {0, -1, 0}, {-1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (const IVec3& s : steps) {
        IVec3 n{c.x + s.x, c.y + s.y, c.z + s.z};
        if (in_bounds(n)) out.push_back(index_of(n));
    }
    std::sort(out.begin(), out.end());
    return out;
}

PHopTable::PHopTable(const IVec3& dims, int max_rank) {
    if (max_rank < 0) throw std::invalid_argument("max_rank must be >= 0");
    // The reach needed to realize the first max_rank distinct squared lengths
    // along one axis is at most max_rank (lengths 1,4,9,... are all distinct).
    int rx = std::min(dims.x - 1, max_rank);
    int ry = std::min(dims.y - 1, max_rank);
    int rz = std::min(dims.z - 1, max_rank);

    std::map<long, std::vector<IVec3>> by_dist2;
    for (int dz = -rz; dz <= rz; ++dz)
        for (int dy = -ry; dy <= ry; ++dy)
            for (int dx = -rx; dx <= rx; ++dx) {
                if (dx == 0 && dy == 0 && dz == 0) continue;
                long d2 = static_cast<long>(dx) * dx + static_cast<long>(dy) * dy +
                          static_cast<long>(dz) * dz;
                by_dist2[d2].push_back({dx, dy, dz});
            }

    int k = 0;
    for (auto& [d2, offsets] : by_dist2) {
        if (k == max_rank) break;
        std::sort(offsets.begin(), offsets.end(), [](const IVec3& a, const IVec3& b) {
            return std::tie(a.z, a.y, a.x) < std::tie(b.z, b.y, b.x);
        });
        radii2_.push_back(d2);
        shells_.push_back(std::move(offsets));
        ++k;
    }
}

std::optional<int> PHopTable::rank_of(const IVec3& offset) const {
    long d2 = static_cast<long>(offset.x) * offset.x + static_cast<long>(offset.y) * offset.y +
              static_cast<long>(offset.z) * offset.z;
    if (d2 == 0) return 0;
    auto it = std::lower_bound(radii2_.begin(), radii2_.end(), d2);
    if (it == radii2_.end() || *it != d2) return std::nullopt;
    return static_cast<int>(it - radii2_.begin()) + 1;
}

std::optional<int> phop_distance(const IVec3& offset, const PHopTable& table) {
    return table.rank_of(offset);
}

std::vector<NodeIndex> shell_nodes(const Grid3D& grid, const PHopTable& table, NodeIndex v,
                                   int k) {
    if (k < 1 || k > table.max_rank()) throw std::invalid_argument("shell rank out of range");
    std::vector<NodeIndex> out;
    IVec3 c = grid.coords_of(v);
    for (const IVec3& off : table.shell(k)) {
        IVec3 n{c.x + off.x, c.y + off.y, c.z + off.z};
        if (grid.in_bounds(n)) out.push_back(grid.index_of(n));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace inferbeam

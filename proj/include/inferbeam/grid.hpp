#ifndef INFERBEAM_GRID_HPP
#define INFERBEAM_GRID_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace inferbeam {

using NodeIndex = std::int32_t;

struct Vec3 {
    double x = 0, y = 0, z = 0;
};

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
double norm(const Vec3& a);

struct IVec3 {
    int x = 0, y = 0, z = 0;
    bool operator==(const IVec3&) const = default;
};

struct Edge {
    NodeIndex u, v;  // u < v
};

// Uniform a x b x c lattice. Node (x,y,z) -> index x + a*(y + b*z); nodes are
// 6-connected. Immutable after construction.
class Grid3D {
  public:
    Grid3D(IVec3 dims, double spacing, Vec3 origin = {});

    const IVec3& dims() const { return dims_; }
    double spacing() const { return spacing_; }
    const Vec3& origin() const { return origin_; }

    NodeIndex node_count() const { return n_nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }

    NodeIndex index_of(const IVec3& c) const {
        return c.x + dims_.x * (c.y + static_cast<NodeIndex>(dims_.y) * c.z);
    }
    IVec3 coords_of(NodeIndex v) const {
        int x = static_cast<int>(v % dims_.x);
        int y = static_cast<int>((v / dims_.x) % dims_.y);
        int z = static_cast<int>(v / (static_cast<NodeIndex>(dims_.x) * dims_.y));
        return {x, y, z};
    }
    bool in_bounds(const IVec3& c) const {
        return c.x >= 0 && c.x < dims_.x && c.y >= 0 && c.y < dims_.y && c.z >= 0 &&
               c.z < dims_.z;
    }

    Vec3 position_of(NodeIndex v) const {
        IVec3 c = coords_of(v);
        return {origin_.x + spacing_ * c.x, origin_.y + spacing_ * c.y, origin_.z + spacing_ * c.z};
    }
    // Nearest node to a world point (component-wise clamp + round; ties toward
    // the lower index via llround semantics).
    NodeIndex nearest_node(const Vec3& p) const;

    double distance_m(NodeIndex a, NodeIndex b) const;

    // in-bounds 6-neighborhood, ascending node index
    std::vector<NodeIndex> neighbors(NodeIndex v) const;

  private:
    IVec3 dims_;
    double spacing_;
    Vec3 origin_;
    NodeIndex n_nodes_;
    std::vector<Edge> edges_;
};

inline Grid3D build_grid(IVec3 dims, double spacing, Vec3 origin = {}) {
    return Grid3D(dims, spacing, origin);
}

// Shells of integer lattice offsets grouped by distinct squared Euclidean
// length, ascending: rank 1 is the 6-neighborhood, rank k the k-th smallest
// distance realizable within the given grid shape. Shared by every node;
// boundary nodes clip shells to bounds.
class PHopTable {
  public:
    PHopTable(const IVec3& dims, int max_rank);

    int max_rank() const { return static_cast<int>(shells_.size()); }
    // squared lattice length of rank k (1-based)
    long radius2(int k) const { return radii2_.at(k - 1); }
    const std::vector<IVec3>& shell(int k) const { return shells_.at(k - 1); }

    // rank of an offset: 0 for (0,0,0), nullopt beyond max_rank
    std::optional<int> rank_of(const IVec3& offset) const;

  private:
    std::vector<long> radii2_;
    std::vector<std::vector<IVec3>> shells_;
};

std::optional<int> phop_distance(const IVec3& offset, const PHopTable& table);

// All in-bounds nodes exactly k p-hops from v, ascending node index.
std::vector<NodeIndex> shell_nodes(const Grid3D& grid, const PHopTable& table, NodeIndex v, int k);

}  // namespace inferbeam

#endif

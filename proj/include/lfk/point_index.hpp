#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "lfk/geom3.hpp"

namespace lfk {

/// Uniform-grid spatial index over a fixed point set with exact
/// nearest-neighbor queries (expanding cell rings with a distance bound).
class PointGridIndex {
public:
    PointGridIndex() = default;
    explicit PointGridIndex(std::vector<Vec3> points) { build(std::move(points)); }

    void build(std::vector<Vec3> points);

    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }

    /// Index of the closest stored point and its distance.
    std::pair<std::size_t, double> nearest(const Vec3& q) const;

    double nearest_distance(const Vec3& q) const { return nearest(q).second; }

private:
    struct Cell {
        std::uint32_t begin = 0, end = 0;
    };

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;  // point ids sorted by cell
    std::vector<Cell> cells_;
    Vec3 lo_{}, hi_{};
    double cell_size_ = 1.0;
    int nx_ = 1, ny_ = 1, nz_ = 1;

    int clampi(int v, int n) const { return v < 0 ? 0 : (v >= n ? n - 1 : v); }
    std::size_t cell_of(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * ny_ + iy) * nx_ + ix;
    }
};

}  // namespace lfk

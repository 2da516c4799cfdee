#include "lfk/point_index.hpp"

#include <algorithm>
#include <cmath>

namespace lfk {

void PointGridIndex::build(std::vector<Vec3> points) {
    points_ = std::move(points);
    if (points_.empty()) return;

    lo_ = hi_ = points_[0];
    for (const Vec3& p : points_) {
        lo_.x = std::min(lo_.x, p.x); lo_.y = std::min(lo_.y, p.y); lo_.z = std::min(lo_.z, p.z);
        hi_.x = std::max(hi_.x, p.x); hi_.y = std::max(hi_.y, p.y); hi_.z = std::max(hi_.z, p.z);
    }
    const double ext_x = hi_.x - lo_.x, ext_y = hi_.y - lo_.y, ext_z = hi_.z - lo_.z;
    const double vol = std::max(ext_x * ext_y * ext_z, 1e-9);
    // aim for a few points per cell
    cell_size_ = std::max(std::cbrt(vol / static_cast<double>(points_.size())) * 1.5, 1e-6);
    nx_ = std::max(1, static_cast<int>(ext_x / cell_size_) + 1);
    ny_ = std::max(1, static_cast<int>(ext_y / cell_size_) + 1);
    nz_ = std::max(1, static_cast<int>(ext_z / cell_size_) + 1);

    auto cell_index = [&](const Vec3& p) {
        int ix = clampi(static_cast<int>((p.x - lo_.x) / cell_size_), nx_);
        int iy = clampi(static_cast<int>((p.y - lo_.y) / cell_size_), ny_);
        int iz = clampi(static_cast<int>((p.z - lo_.z) / cell_size_), nz_);
        return cell_of(ix, iy, iz);
    };

    const std::size_t ncells = static_cast<std::size_t>(nx_) * ny_ * nz_;
    std::vector<std::uint32_t> counts(ncells + 1, 0);
    for (const Vec3& p : points_) counts[cell_index(p) + 1]++;
    for (std::size_t c = 0; c < ncells; ++c) counts[c + 1] += counts[c];

    order_.resize(points_.size());
    std::vector<std::uint32_t> cursor(counts.begin(), counts.end() - 1);
    for (std::uint32_t i = 0; i < points_.size(); ++i) order_[cursor[cell_index(points_[i])]++] = i;

    cells_.resize(ncells);
    for (std::size_t c = 0; c < ncells; ++c) cells_[c] = {counts[c], counts[c + 1]};
}

std::pair<std::size_t, double> PointGridIndex::nearest(const Vec3& q) const {
    const int qx = clampi(static_cast<int>((q.x - lo_.x) / cell_size_), nx_);
    const int qy = clampi(static_cast<int>((q.y - lo_.y) / cell_size_), ny_);
    const int qz = clampi(static_cast<int>((q.z - lo_.z) / cell_size_), nz_);

    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();

    const int max_ring = std::max({nx_, ny_, nz_});
    for (int ring = 0; ring <= max_ring; ++ring) {
        // Once a candidate is known, stop when the closest possible point in
        // this ring is already farther than it.
        if (best_d2 < std::numeric_limits<double>::infinity()) {
            const double min_possible = (ring - 1) * cell_size_;
            if (ring >= 1 && min_possible > 0 && min_possible * min_possible > best_d2) break;
        }
        const int x0 = qx - ring, x1 = qx + ring;
        const int y0 = qy - ring, y1 = qy + ring;
        const int z0 = qz - ring, z1 = qz + ring;
        for (int iz = std::max(z0, 0); iz <= std::min(z1, nz_ - 1); ++iz)
            for (int iy = std::max(y0, 0); iy <= std::min(y1, ny_ - 1); ++iy)
                for (int ix = std::max(x0, 0); ix <= std::min(x1, nx_ - 1); ++ix) {
                    const bool shell = ix == x0 || ix == x1 || iy == y0 || iy == y1 ||
                                       iz == z0 || iz == z1;
                    if (!shell) continue;
                    const Cell& c = cells_[cell_of(ix, iy, iz)];
                    for (std::uint32_t k = c.begin; k < c.end; ++k) {
                        const std::uint32_t id = order_[k];
                        const double d2 = norm2(points_[id] - q);
                        if (d2 < best_d2) {
                            best_d2 = d2;
                            best = id;
                        }
                    }
                }
    }
    return {best, std::sqrt(best_d2)};
}

}  // namespace lfk

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "lfk/geometry.hpp"

namespace lfk {

enum class Region : std::uint32_t { Torso = 0, Heart = 1 };

/// Labeled tetrahedral mesh: a background cubic grid of spacing h split into
/// 6 tets per cube, clipped to the torso implicit. Immutable once built.
struct TetMesh {
    std::vector<Vec3> nodes;                        // mm
    std::vector<std::array<std::uint32_t, 4>> tets;
    std::vector<Region> region;                     // per tet
    std::vector<Vec3> fibers;                       // per tet, zero outside the heart
    std::vector<double> element_volume;             // mm^3

    std::vector<std::array<std::uint32_t, 3>> boundary_faces;  // outward oriented
    std::vector<double> boundary_face_area;                    // mm^2
    std::vector<std::uint8_t> node_is_boundary;

    double h = 0.0;  // grid spacing, mm

    std::size_t num_nodes() const { return nodes.size(); }
    std::size_t num_tets() const { return tets.size(); }

    Vec3 centroid(std::size_t t) const {
        const auto& k = tets[t];
        return (nodes[k[0]] + nodes[k[1]] + nodes[k[2]] + nodes[k[3]]) * 0.25;
    }

    std::vector<std::uint32_t> heart_elements() const;
    /// Nodes incident to at least one HEART element.
    std::vector<std::uint32_t> heart_nodes() const;

    /// Area-lumped boundary weight per node (sum of adjacent face areas / 3);
    /// zero for interior nodes.
    std::vector<double> boundary_node_weights() const;
};

/// Maps 4 nodal values to the constant element gradient (rows x,y,z; 1/mm).
struct GradOp {
    std::array<std::array<double, 4>, 3> b{};

    Vec3 apply(const std::array<double, 4>& v) const {
        Vec3 g;
        for (int r = 0; r < 3; ++r)
            g[r] = b[r][0] * v[0] + b[r][1] * v[1] + b[r][2] * v[2] + b[r][3] * v[3];
        return g;
    }
};

TetMesh build_mesh(const ShapeSet& shapes, double h);

/// Mesh of a single implicit surface (used by benchmarks and oracles).
TetMesh build_mesh_single(const Ellipsoid& domain, double h);

std::uint32_t nearest_boundary_node(const TetMesh& mesh, const Vec3& x);

GradOp element_gradient_operator(const TetMesh& mesh, std::size_t t);

/// Point location with a cell index over element bounding boxes.
class PointLocator {
public:
    explicit PointLocator(const TetMesh& mesh);

    /// Containing tet and barycentric coordinates, or nullopt when outside
    /// every element (relative tolerance 1e-9).
    std::optional<std::pair<std::uint32_t, std::array<double, 4>>> locate(const Vec3& x) const;

private:
    const TetMesh& mesh_;
    Vec3 lo_{}, hi_{};
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<std::vector<std::uint32_t>> bins_;

    std::size_t bin_of(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * ny_ + iy) * nx_ + ix;
    }
};

/// Barycentric coordinates of x in tet t.
std::array<double, 4> barycentric(const TetMesh& mesh, std::size_t t, const Vec3& x);

}  // namespace lfk

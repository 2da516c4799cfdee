#include "lfk/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <unordered_map>

#include "lfk/errors.hpp"

namespace lfk {

namespace {

// Kuhn/Freudenthal split: 6 tets per cube, all sharing the main diagonal
// (0,0,0)-(1,1,1); face-compatible across neighboring cubes.
constexpr int kAxisPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

struct FaceKey {
    std::uint32_t a, b, c;  // sorted
    bool operator==(const FaceKey& o) const { return a == o.a && b == o.b && c == o.c; }
};
struct FaceKeyHash {
    std::size_t operator()(const FaceKey& k) const {
        std::size_t h = k.a * 0x9E3779B1u;
        h ^= k.b + 0x9E3779B1u + (h << 6) + (h >> 2);
        h ^= k.c + 0x85EBCA77u + (h << 6) + (h >> 2);
        return h;
    }
};

double tet_signed_volume(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3) {
    return dot(cross(p1 - p0, p2 - p0), p3 - p0) / 6.0;
}

struct GridSpec {
    Vec3 lo;
    int nx, ny, nz;
};

template <class InsideFn, class RegionFn>
TetMesh build_from_grid(const GridSpec& g, double h, InsideFn inside, RegionFn region_of) {
    TetMesh mesh;
    mesh.h = h;

    const std::int64_t nnx = g.nx + 1, nny = g.ny + 1;
    auto grid_node = [&](int i, int j, int k) -> std::int64_t {
        return (static_cast<std::int64_t>(k) * nny + j) * nnx + i;
    };

    std::unordered_map<std::int64_t, std::uint32_t> node_map;
    auto emit_node = [&](int i, int j, int k) -> std::uint32_t {
        const std::int64_t key = grid_node(i, j, k);
        auto it = node_map.find(key);
        if (it != node_map.end()) return it->second;
        const std::uint32_t id = static_cast<std::uint32_t>(mesh.nodes.size());
        node_map.emplace(key, id);
        mesh.nodes.push_back({g.lo.x + i * h, g.lo.y + j * h, g.lo.z + k * h});
        return id;
    };

    for (int k = 0; k < g.nz; ++k)
        for (int j = 0; j < g.ny; ++j)
            for (int i = 0; i < g.nx; ++i) {
                const Vec3 corner{g.lo.x + i * h, g.lo.y + j * h, g.lo.z + k * h};
                for (const auto& perm : kAxisPerm) {
                    int idx[4][3] = {{i, j, k}, {i, j, k}, {i, j, k}, {i + 1, j + 1, k + 1}};
                    idx[1][perm[0]] += 1;
                    idx[2][perm[0]] += 1;
                    idx[2][perm[1]] += 1;
                    Vec3 p[4];
                    for (int v = 0; v < 4; ++v)
                        p[v] = {g.lo.x + idx[v][0] * h, g.lo.y + idx[v][1] * h,
                                g.lo.z + idx[v][2] * h};
                    const Vec3 centroid = (p[0] + p[1] + p[2] + p[3]) * 0.25;
                    if (!inside(centroid)) continue;

                    double vol = tet_signed_volume(p[0], p[1], p[2], p[3]);
                    bool swap23 = vol < 0;
                    if (swap23) vol = -vol;

                    std::array<std::uint32_t, 4> tn;
                    tn[0] = emit_node(idx[0][0], idx[0][1], idx[0][2]);
                    tn[1] = emit_node(idx[1][0], idx[1][1], idx[1][2]);
                    tn[2] = emit_node(idx[swap23 ? 3 : 2][0], idx[swap23 ? 3 : 2][1], idx[swap23 ? 3 : 2][2]);
                    tn[3] = emit_node(idx[swap23 ? 2 : 3][0], idx[swap23 ? 2 : 3][1], idx[swap23 ? 2 : 3][2]);
                    mesh.tets.push_back(tn);
                    mesh.element_volume.push_back(vol);
                    mesh.region.push_back(region_of(centroid));
                }
                (void)corner;
            }

    // boundary = faces owned by exactly one tet
    std::unordered_map<FaceKey, std::pair<std::uint32_t, int>, FaceKeyHash> face_count;
    face_count.reserve(mesh.tets.size() * 2);
    constexpr int kFaceVerts[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    auto key_of = [&](const std::array<std::uint32_t, 4>& t, int f) {
        std::uint32_t v[3] = {t[kFaceVerts[f][0]], t[kFaceVerts[f][1]], t[kFaceVerts[f][2]]};
        std::sort(v, v + 3);
        return FaceKey{v[0], v[1], v[2]};
    };
    for (std::uint32_t t = 0; t < mesh.tets.size(); ++t)
        for (int f = 0; f < 4; ++f) {
            auto [it, inserted] = face_count.try_emplace(key_of(mesh.tets[t], f), std::make_pair(t, f));
            if (!inserted) it->second.second = -1;  // shared
        }

    mesh.node_is_boundary.assign(mesh.nodes.size(), 0);
    for (const auto& [key, owner] : face_count) {
        if (owner.second < 0) continue;
        const auto& t = mesh.tets[owner.first];
        const int f = owner.second;
        std::array<std::uint32_t, 3> fv = {t[kFaceVerts[f][0]], t[kFaceVerts[f][1]], t[kFaceVerts[f][2]]};
        const Vec3 a = mesh.nodes[fv[0]], b = mesh.nodes[fv[1]], c = mesh.nodes[fv[2]];
        const Vec3 opp = mesh.nodes[t[f]];
        Vec3 n = cross(b - a, c - a);
        if (dot(n, a - opp) < 0) std::swap(fv[1], fv[2]);
        mesh.boundary_faces.push_back(fv);
        mesh.boundary_face_area.push_back(0.5 * norm(cross(b - a, c - a)));
        for (std::uint32_t v : fv) mesh.node_is_boundary[v] = 1;
    }

    // deterministic face order regardless of hash-map iteration
    std::vector<std::size_t> order(mesh.boundary_faces.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return mesh.boundary_faces[x] < mesh.boundary_faces[y];
    });
    std::vector<std::array<std::uint32_t, 3>> faces(order.size());
    std::vector<double> areas(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        faces[i] = mesh.boundary_faces[order[i]];
        areas[i] = mesh.boundary_face_area[order[i]];
    }
    mesh.boundary_faces = std::move(faces);
    mesh.boundary_face_area = std::move(areas);

    return mesh;
}

}  // namespace

TetMesh build_mesh(const ShapeSet& shapes, double h) {
    if (h <= 0) throw InputError("build_mesh: h must be positive");
    const Vec3 b = shapes.torso.semi_axes;
    GridSpec g;
    g.nx = 2 * (static_cast<int>(b.x / h) + 1);
    g.ny = 2 * (static_cast<int>(b.y / h) + 1);
    g.nz = 2 * (static_cast<int>(b.z / h) + 1);
    g.lo = {-0.5 * g.nx * h, -0.5 * g.ny * h, -0.5 * g.nz * h};

    TetMesh mesh = build_from_grid(
        g, h, [&](const Vec3& c) { return shapes.torso.implicit(c) < 0.0; },
        [&](const Vec3& c) { return shapes.in_myocardium(c) ? Region::Heart : Region::Torso; });

    mesh.fibers.assign(mesh.tets.size(), Vec3{0, 0, 0});
    std::size_t n_heart = 0;
    for (std::size_t t = 0; t < mesh.tets.size(); ++t)
        if (mesh.region[t] == Region::Heart) {
            mesh.fibers[t] = fiber_direction(shapes, mesh.centroid(t));
            ++n_heart;
        }
    if (n_heart == 0)
        throw InputError("build_mesh: h too large to resolve the heart wall (no HEART elements)");
    return mesh;
}

TetMesh build_mesh_single(const Ellipsoid& domain, double h) {
    if (h <= 0) throw InputError("build_mesh_single: h must be positive");
    Vec3 ext{0, 0, 0};
    for (int r = 0; r < 3; ++r) {
        double e = 0;
        for (int c = 0; c < 3; ++c) e += std::abs(domain.rot(r, c)) * domain.semi_axes[c];
        ext[r] = e;
    }
    GridSpec g;
    g.nx = 2 * (static_cast<int>(ext.x / h) + 1);
    g.ny = 2 * (static_cast<int>(ext.y / h) + 1);
    g.nz = 2 * (static_cast<int>(ext.z / h) + 1);
    g.lo = domain.center - Vec3{0.5 * g.nx * h, 0.5 * g.ny * h, 0.5 * g.nz * h};

    TetMesh mesh = build_from_grid(
        g, h, [&](const Vec3& c) { return domain.implicit(c) < 0.0; },
        [](const Vec3&) { return Region::Torso; });
    mesh.fibers.assign(mesh.tets.size(), Vec3{0, 0, 0});
    return mesh;
}

std::vector<std::uint32_t> TetMesh::heart_elements() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t t = 0; t < tets.size(); ++t)
        if (region[t] == Region::Heart) out.push_back(t);
    return out;
}

std::vector<std::uint32_t> TetMesh::heart_nodes() const {
    std::vector<std::uint8_t> mark(nodes.size(), 0);
    for (std::size_t t = 0; t < tets.size(); ++t)
        if (region[t] == Region::Heart)
            for (std::uint32_t v : tets[t]) mark[v] = 1;
    std::vector<std::uint32_t> out;
    for (std::uint32_t v = 0; v < nodes.size(); ++v)
        if (mark[v]) out.push_back(v);
    return out;
}

std::vector<double> TetMesh::boundary_node_weights() const {
    std::vector<double> w(nodes.size(), 0.0);
    for (std::size_t f = 0; f < boundary_faces.size(); ++f)
        for (std::uint32_t v : boundary_faces[f]) w[v] += boundary_face_area[f] / 3.0;
    return w;
}

std::uint32_t nearest_boundary_node(const TetMesh& mesh, const Vec3& x) {
    if (mesh.boundary_faces.empty()) throw InputError("nearest_boundary_node: no boundary");
    std::uint32_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::uint32_t v = 0; v < mesh.nodes.size(); ++v) {
        if (!mesh.node_is_boundary[v]) continue;
        const double d2 = norm2(mesh.nodes[v] - x);
        if (d2 < best_d2) {  // strict: ties keep the lowest index
            best_d2 = d2;
            best = v;
        }
    }
    return best;
}

GradOp element_gradient_operator(const TetMesh& mesh, std::size_t t) {
    const auto& k = mesh.tets[t];
    const Vec3 p0 = mesh.nodes[k[0]];
    Mat3 J;
    for (int c = 0; c < 3; ++c) {
        const Vec3 e = mesh.nodes[k[c + 1]] - p0;
        J(0, c) = e.x;
        J(1, c) = e.y;
        J(2, c) = e.z;
    }
    const double d = J.det();
    if (std::abs(d) < 1e-12) throw InputError("element_gradient_operator: degenerate tet");
    const Mat3 Jinv = J.inverse();

    GradOp op;
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int j = 1; j < 4; ++j) {
            op.b[r][j] = Jinv(j - 1, r);
            s += op.b[r][j];
        }
        op.b[r][0] = -s;
    }
    return op;
}

std::array<double, 4> barycentric(const TetMesh& mesh, std::size_t t, const Vec3& x) {
    const auto& k = mesh.tets[t];
    const Vec3 p0 = mesh.nodes[k[0]];
    Mat3 J;
    for (int c = 0; c < 3; ++c) {
        const Vec3 e = mesh.nodes[k[c + 1]] - p0;
        J(0, c) = e.x;
        J(1, c) = e.y;
        J(2, c) = e.z;
    }
    const Vec3 xi = J.inverse() * (x - p0);
    return {1.0 - xi.x - xi.y - xi.z, xi.x, xi.y, xi.z};
}

PointLocator::PointLocator(const TetMesh& mesh) : mesh_(mesh) {
    lo_ = hi_ = mesh.nodes.empty() ? Vec3{} : mesh.nodes[0];
    for (const Vec3& p : mesh.nodes) {
        lo_.x = std::min(lo_.x, p.x); lo_.y = std::min(lo_.y, p.y); lo_.z = std::min(lo_.z, p.z);
        hi_.x = std::max(hi_.x, p.x); hi_.y = std::max(hi_.y, p.y); hi_.z = std::max(hi_.z, p.z);
    }
    cell_ = std::max(mesh.h, 1e-6);
    nx_ = std::max(1, static_cast<int>((hi_.x - lo_.x) / cell_) + 1);
    ny_ = std::max(1, static_cast<int>((hi_.y - lo_.y) / cell_) + 1);
    nz_ = std::max(1, static_cast<int>((hi_.z - lo_.z) / cell_) + 1);
    bins_.resize(static_cast<std::size_t>(nx_) * ny_ * nz_);

    auto clampc = [](int v, int n) { return v < 0 ? 0 : (v >= n ? n - 1 : v); };
    for (std::uint32_t t = 0; t < mesh.tets.size(); ++t) {
        Vec3 blo = mesh.nodes[mesh.tets[t][0]], bhi = blo;
        for (int v = 1; v < 4; ++v) {
            const Vec3 p = mesh.nodes[mesh.tets[t][v]];
            blo.x = std::min(blo.x, p.x); blo.y = std::min(blo.y, p.y); blo.z = std::min(blo.z, p.z);
            bhi.x = std::max(bhi.x, p.x); bhi.y = std::max(bhi.y, p.y); bhi.z = std::max(bhi.z, p.z);
        }
        const int x0 = clampc(static_cast<int>((blo.x - lo_.x) / cell_), nx_);
        const int x1 = clampc(static_cast<int>((bhi.x - lo_.x) / cell_), nx_);
        const int y0 = clampc(static_cast<int>((blo.y - lo_.y) / cell_), ny_);
        const int y1 = clampc(static_cast<int>((bhi.y - lo_.y) / cell_), ny_);
        const int z0 = clampc(static_cast<int>((blo.z - lo_.z) / cell_), nz_);
        const int z1 = clampc(static_cast<int>((bhi.z - lo_.z) / cell_), nz_);
        for (int iz = z0; iz <= z1; ++iz)
            for (int iy = y0; iy <= y1; ++iy)
                for (int ix = x0; ix <= x1; ++ix) bins_[bin_of(ix, iy, iz)].push_back(t);
    }
}

std::optional<std::pair<std::uint32_t, std::array<double, 4>>> PointLocator::locate(
    const Vec3& x) const {
    if (x.x < lo_.x || x.y < lo_.y || x.z < lo_.z || x.x > hi_.x || x.y > hi_.y || x.z > hi_.z)
        return std::nullopt;
    const int ix = std::min(nx_ - 1, std::max(0, static_cast<int>((x.x - lo_.x) / cell_)));
    const int iy = std::min(ny_ - 1, std::max(0, static_cast<int>((x.y - lo_.y) / cell_)));
    const int iz = std::min(nz_ - 1, std::max(0, static_cast<int>((x.z - lo_.z) / cell_)));
    constexpr double kTol = -1e-9;
    for (std::uint32_t t : bins_[bin_of(ix, iy, iz)]) {
        const auto bc = barycentric(mesh_, t, x);
        if (bc[0] >= kTol && bc[1] >= kTol && bc[2] >= kTol && bc[3] >= kTol)
            return std::make_pair(t, bc);
    }
    return std::nullopt;
}

}  // namespace lfk
